#include "ssvae/nn/optim.hpp"

#include <cmath>
#include <sstream>

#include "ssvae/error.hpp"
#include "ssvae/simd/kernels.hpp"

namespace ssvae::nn {

void rmsprop_step(ParamStore& store, const RmsPropConfig& config) {
  std::ostringstream bad;
  std::size_t bad_count = 0;
  for (const auto& [name, entry] : store) {
    if (!entry.trainable) continue;
    std::size_t non_finite = 0;
    for (float g : entry.grad.values()) non_finite += std::isfinite(g) ? 0 : 1;
    if (non_finite) {
      bad << (bad_count++ ? ", " : "") << name << " (" << non_finite << " of " << entry.grad.size() << ")";
    }
  }
  if (bad_count) throw NumericError("rmsprop_step aborted: non-finite gradients in " + bad.str());

  for (auto& [name, entry] : store) {
    if (entry.trainable) {
      simd::rmsprop_update(entry.value.size(), config.lr, config.rho, config.eps, entry.grad.data(),
                           entry.accumulator.data(), entry.value.data());
    }
    entry.grad.fill(0.0f);
  }
}

}  // namespace ssvae::nn
