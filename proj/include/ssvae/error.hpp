#pragma once

#include <stdexcept>
#include <string>

namespace ssvae {

/// Invalid shapes, geometry or hyperparameters supplied by the caller.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN/Inf encountered in activations, gradients or losses.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing dataset files, checkpoints and manifests.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training hit a non-finite loss. The model has been rolled back to the
/// parameters of the last completed epoch.
class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace ssvae
