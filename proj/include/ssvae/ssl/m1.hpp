#pragma once

// M1: a VAE trained on every training segment supplies posterior-mean
// features; an external linear classifier is fitted on the labeled ones.

#include <filesystem>
#include <span>
#include <vector>

#include "ssvae/ssl/linear_classifier.hpp"
#include "ssvae/vae/train.hpp"
#include "ssvae/vae/vae.hpp"

namespace ssvae::ssl {

struct M1Model {
  vae::VaeModel vae;
  LinearClassifier classifier;
};

/// Posterior means mu(x) [B,latent]; throws ConfigError for an untrained VAE.
Tensor m1_extract_features(const M1Model& model, const Tensor& x);

/// Fits the external classifier on labeled features. Errors when N < K or a
/// class is absent (the message lists the absent classes).
LinearClassifier m1_train_classifier(const Tensor& features, std::span<const int> labels, std::size_t classes,
                                     const LinearClassifierConfig& config = {});

/// Trains the VAE on all segments (labeled + unlabeled) and the classifier on
/// the labeled ones.
M1Model m1_fit(const vae::ArchConfig& arch, std::uint64_t init_seed, const Tensor& all_segments,
               const Tensor& labeled_segments, std::span<const int> labels, std::size_t classes,
               const vae::FitConfig& vae_config, const LinearClassifierConfig& classifier_config = {},
               vae::TrainingLog* log = nullptr);

/// classifier(features(x)). Throws ConfigError if either part is untrained.
std::vector<int> predict(const M1Model& model, const Tensor& x);

/// Checkpoint tagged "m1": the VAE store plus "svm.*" classifier entries.
void save_m1(const M1Model& model, const std::filesystem::path& path);
M1Model load_m1(const std::filesystem::path& path);

}  // namespace ssvae::ssl
