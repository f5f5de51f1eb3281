#include "ssvae/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "ssvae/nn/ops.hpp"
#include "ssvae/rng.hpp"

namespace ssvae::nn {

namespace {

double summed_difference(const Tensor& up, const Tensor& down) {
  double s = 0.0;
  for (std::size_t i = 0; i < up.size(); ++i) s += static_cast<double>(up[i]) - static_cast<double>(down[i]);
  return s;
}

}  // namespace

GradCheckResult grad_check(const std::function<Var()>& loss_fn, ParamStore& store,
                           const GradCheckOptions& options) {
  store.zero_grad();
  std::uint64_t base_pattern = 0;
  {
    PatternCapture capture;
    Var terms = loss_fn();
    base_pattern = capture.digest();
    backward(terms.value().size() == 1 ? terms : sum_all(terms));
  }

  auto evaluate = [&](bool& same_piece) {
    PatternCapture capture;
    Tensor v = loss_fn().value();
    same_piece = same_piece && capture.digest() == base_pattern;
    return v;
  };
  // Central difference; smooth is false when either end of the stencil
  // leaves the piecewise-linear region of the unperturbed point.
  auto central = [&](ParamEntry& entry, std::size_t idx, double eps, bool& smooth) {
    const float original = entry.value[idx];
    const float up = static_cast<float>(original + eps);
    const float down = static_cast<float>(original - eps);
    smooth = true;
    entry.value[idx] = up;
    const Tensor f_up = evaluate(smooth);
    entry.value[idx] = down;
    const Tensor f_down = evaluate(smooth);
    entry.value[idx] = original;
    // Divide by the step actually representable in float.
    return summed_difference(f_up, f_down) / (static_cast<double>(up) - static_cast<double>(down));
  };

  GradCheckResult result;
  RngStream rng(options.seed);
  for (auto& [name, entry] : store) {
    if (!entry.trainable) continue;
    const Tensor analytic = entry.grad;
    std::vector<std::size_t> indices;
    if (entry.value.size() <= options.samples_per_entry) {
      for (std::size_t i = 0; i < entry.value.size(); ++i) indices.push_back(i);
    } else {
      auto perm = rng.permutation(entry.value.size());
      indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(options.samples_per_entry));
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0, worst_abs = -1.0;
    std::size_t worst_idx = 0;
    double worst_a = 0.0, worst_n = 0.0;
    for (std::size_t idx : indices) {
      double eps = options.eps;
      bool smooth = false;
      double numeric = central(entry, idx, eps, smooth);
      for (int attempt = 0; !smooth && attempt < options.kink_refinements; ++attempt) {
        eps *= 0.1;
        numeric = central(entry, idx, eps, smooth);
      }
      if (!smooth) {
        ++result.kinks;
        continue;
      }
      const double a = analytic[idx];
      diff2 += (a - numeric) * (a - numeric);
      a2 += a * a;
      n2 += numeric * numeric;
      if (std::abs(a - numeric) > worst_abs) {
        worst_abs = std::abs(a - numeric);
        worst_idx = idx;
        worst_a = a;
        worst_n = numeric;
      }
      ++result.checked;
    }
    const double denom = std::sqrt(std::max(a2, n2));
    const double rel = denom > 0.0 ? std::sqrt(diff2) / denom : 0.0;
    if (rel > result.max_relative_error || result.worst_entry.empty()) {
      result.max_relative_error = std::max(rel, result.max_relative_error);
      result.worst_entry = name;
      result.worst_index = worst_idx;
      result.worst_analytic = worst_a;
      result.worst_numeric = worst_n;
    }
  }
  store.zero_grad();
  return result;
}

}  // namespace ssvae::nn
