#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "ssvae/nn/optim.hpp"

namespace ssvae::baselines {

/// Mini-batch RMSprop settings shared by the autoencoder and the CNN.
struct TrainConfig {
  std::size_t batch_size = 200;
  int epochs = 10;
  nn::RmsPropConfig optimizer{};
  std::uint64_t seed = 0;
  /// Optimizer steps per epoch; 0 means one pass over the training rows.
  /// Batches are drawn from a permutation that is reshuffled when exhausted.
  std::size_t steps_per_epoch = 0;
  /// When set, the rolled-back model is written here before a divergence is reported.
  std::filesystem::path divergence_checkpoint;

  void validate() const;
};

}  // namespace ssvae::baselines
