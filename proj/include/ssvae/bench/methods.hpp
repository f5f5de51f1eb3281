#pragma once

// Trains, evaluates and stores any of the five methods behind one interface.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

#include "ssvae/baselines/autoencoder.hpp"
#include "ssvae/baselines/cnn.hpp"
#include "ssvae/baselines/pca.hpp"
#include "ssvae/bench/config.hpp"
#include "ssvae/data/split.hpp"
#include "ssvae/ssl/m1.hpp"
#include "ssvae/ssl/m2.hpp"

namespace ssvae::bench {

using AnyModel = std::variant<baselines::PcaClassifier, baselines::AeClassifier, baselines::CnnModel, ssl::M1Model,
                              ssl::M2Model>;

Method model_method(const AnyModel& model) noexcept;

/// Deterministic seed for one method and purpose within a round.
std::uint64_t derive_seed(std::uint64_t round_seed, Method method, std::uint64_t purpose);

/// The label-independent parts (PCA, autoencoder, M1's VAE), fitted lazily
/// on all training windows of a round and reused for every budget.
class UnsupervisedCache {
 public:
  UnsupervisedCache(const ExperimentConfig& config, Tensor train_all, std::uint64_t round_seed);

  const baselines::PcaModel& pca();
  const baselines::AeModel& ae();
  const vae::VaeModel& vae();
  /// Seconds spent fitting the part a method uses (0 before it is fitted).
  double fit_seconds(Method method) const;

 private:
  const ExperimentConfig* config_;
  Tensor train_;
  std::uint64_t round_seed_;
  std::optional<baselines::PcaModel> pca_;
  std::unique_ptr<baselines::AeModel> ae_;
  std::unique_ptr<vae::VaeModel> vae_;
  double pca_seconds_ = 0.0, ae_seconds_ = 0.0, vae_seconds_ = 0.0;
};

/// Fits one method on a split. Unsupervised parts come from the cache.
AnyModel train_method(Method method, const ExperimentConfig& config, const data::SemiSplit& split,
                      std::size_t classes, std::uint64_t round_seed, UnsupervisedCache& cache);

std::vector<int> predict(const AnyModel& model, const Tensor& x);
/// Top-1 accuracy in percent.
double accuracy_percent(const AnyModel& model, const data::SegmentSet& test);

/// Stored under the method's checkpoint tag (pca, ae, cnn, m1, m2).
void save_model(const AnyModel& model, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path);

/// Decoder reconstructions [N,D] for ae, m1 (decode of the posterior mean)
/// and m2 (with the predicted class). ConfigError for pca and cnn.
Tensor reconstruct(const AnyModel& model, const Tensor& x);

}  // namespace ssvae::bench
