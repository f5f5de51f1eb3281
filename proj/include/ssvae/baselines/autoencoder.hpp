#pragma once

// Deterministic autoencoder with the VAE's encoder/decoder geometry: the
// encoder emits the code directly (latent_dim values), trained on MSE.

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ssvae/baselines/train_config.hpp"
#include "ssvae/models/networks.hpp"
#include "ssvae/ssl/linear_classifier.hpp"

namespace ssvae::baselines {

using models::ArchConfig;
using nn::ForwardContext;
using nn::Var;

class AeModel {
 public:
  explicit AeModel(ArchConfig arch = {}, std::uint64_t init_seed = 0);

  AeModel(AeModel&&) noexcept = default;
  AeModel& operator=(AeModel&&) noexcept = default;

  const ArchConfig& arch() const { return arch_; }
  nn::ParamStore& params() { return *store_; }
  const nn::ParamStore& params() const { return *store_; }
  std::size_t code_dim() const { return arch_.latent_dim; }

  Var encode(const Var& x, const ForwardContext& ctx) const;
  Var decode(const Var& code) const;

  bool trained() const { return trained_; }
  void set_trained(bool trained) { trained_ = trained; }

 private:
  ArchConfig arch_;
  std::unique_ptr<nn::ParamStore> store_;
  models::Encoder encoder_;
  models::Decoder decoder_;
  bool trained_ = false;
};

/// mean over all elements of (x - x_hat)^2 -> [1].
Var mse(const Var& x, const Var& x_hat);

struct AeTrainingLog {
  std::vector<double> epoch_mse;
};

/// Mini-batch RMSprop on MSE. Rolls back and throws TrainingDiverged on a
/// non-finite loss.
AeTrainingLog ae_fit(AeModel& model, const Tensor& segments, const TrainConfig& config);

/// Eval-mode codes [N,code_dim] and reconstructions [N,D].
Tensor ae_codes(const AeModel& model, const Tensor& x, std::size_t batch_size = 200);
Tensor ae_reconstruct(const AeModel& model, const Tensor& x, std::size_t batch_size = 200);

struct AeClassifier {
  AeModel ae;
  ssl::LinearClassifier classifier;
};

/// Autoencoder on all training segments, classifier on the labeled codes.
AeClassifier ae_fit_classifier(const ArchConfig& arch, std::uint64_t init_seed, const Tensor& all_segments,
                               const Tensor& labeled_segments, std::span<const int> labels, std::size_t classes,
                               const TrainConfig& config, const ssl::LinearClassifierConfig& classifier_config = {},
                               AeTrainingLog* log = nullptr);

std::vector<int> predict(const AeClassifier& model, const Tensor& x);

/// Checkpoint tagged "ae".
void save_ae(const AeClassifier& model, const std::filesystem::path& path);
AeClassifier load_ae(const std::filesystem::path& path);

}  // namespace ssvae::baselines
