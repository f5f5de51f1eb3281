#pragma once

#include <functional>
#include <string>

#include "ssvae/nn/autograd.hpp"
#include "ssvae/nn/param_store.hpp"

namespace ssvae::nn {

struct GradCheckOptions {
  double eps = 1e-3;
  /// Elements sampled per entry (all of them if the entry is smaller).
  std::size_t samples_per_entry = 12;
  std::uint64_t seed = 0;
  /// A stencil that flips a relu mask, a max-pool winner or a clamp (see
  /// PatternCapture) straddles a kink. It is retried with a 10x smaller step
  /// up to kink_refinements times, then the element is skipped and counted.
  int kink_refinements = 1;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_entry;
  /// Element of worst_entry with the largest |analytic - numeric|.
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  /// Sampled elements skipped because every stencil tried straddled a kink.
  std::size_t kinks = 0;
  double kink_fraction() const {
    return checked + kinks == 0 ? 0.0 : static_cast<double>(kinks) / static_cast<double>(checked + kinks);
  }
};

/// Compares reverse-mode gradients of loss_fn against central differences
/// (f(w+eps) - f(w-eps)) / (2 eps) on a random subsample of every trainable
/// entry. loss_fn must rebuild the graph from the store's current values and
/// be deterministic (reseed any noise it draws).
///
/// loss_fn may return the loss itself or a tensor of terms whose sum is the
/// loss. With terms, f(w+eps) - f(w-eps) is accumulated term by term in
/// double, so rounding the total to float does not swamp the step.
///
/// The error of an entry is ||a - n|| / max(||a||, ||n||) over its sampled
/// elements a (analytic) and n (numeric); the result is the worst entry.
/// Entries whose sampled gradients are both exactly zero count as 0.
GradCheckResult grad_check(const std::function<Var()>& loss_fn, ParamStore& store,
                           const GradCheckOptions& options = {});

}  // namespace ssvae::nn
