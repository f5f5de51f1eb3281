#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssvae/nn/optim.hpp"
#include "ssvae/vae/vae.hpp"

namespace ssvae::vae {

/// beta(e) = start + (end - start) * min(1, e / warmup_epochs) for 0-based
/// epoch e; warmup_epochs == 0 means beta = end throughout.
struct BetaSchedule {
  float start = 0.0f;
  float end = 1.0f;
  int warmup_epochs = 5;

  float at(int epoch) const;
  void validate() const;
};

struct FitConfig {
  std::size_t batch_size = 200;
  int epochs = 10;
  nn::RmsPropConfig optimizer{};
  BetaSchedule beta{};
  /// Monte Carlo samples per row for the training objective.
  std::size_t mc_samples = 1;
  /// KL-vanishing monitor: after warmup the epoch-mean KL (summed over
  /// latent dims) must stay above this many nats.
  float kl_floor = 0.01f;
  std::uint64_t seed = 0;
  /// When set, the rolled-back model is written here before a divergence is reported.
  std::filesystem::path divergence_checkpoint;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double recon = 0.0;
  double kl = 0.0;
  double beta = 0.0;
  double elbo = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  /// First post-warmup epoch whose KL fell below kl_floor, or -1.
  int kl_vanished_epoch = -1;
  bool kl_vanished() const { return kl_vanished_epoch >= 0; }
};

/// Mini-batch RMSprop on -ELBO. Segments [N,input_dim] are reshuffled every
/// epoch from the config seed. On a non-finite loss or gradient the model is
/// rolled back to the parameters at the start of the failing epoch and
/// TrainingDiverged is thrown.
TrainingLog fit_vae(VaeModel& model, const Tensor& segments, const FitConfig& config);

/// CSV with header epoch,recon,kl,beta,elbo.
void write_training_csv(const TrainingLog& log, const std::filesystem::path& path);
std::string training_csv(const TrainingLog& log);

}  // namespace ssvae::vae
