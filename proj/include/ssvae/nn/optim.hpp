#pragma once

#include "ssvae/nn/param_store.hpp"

namespace ssvae::nn {

struct RmsPropConfig {
  float lr = 1e-4f;
  float rho = 0.9f;
  float eps = 1e-8f;
};

/// One RMSprop update of every trainable entry, then zeroes all gradients.
/// If any gradient is non-finite nothing is modified and NumericError lists
/// the offending entries.
void rmsprop_step(ParamStore& store, const RmsPropConfig& config);

}  // namespace ssvae::nn
