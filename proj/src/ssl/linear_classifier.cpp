#include "ssvae/ssl/linear_classifier.hpp"

#include <algorithm>
#include <cmath>

#include "ssvae/error.hpp"
#include "ssvae/ssl/labels.hpp"

namespace ssvae::ssl {

namespace {

// Standardized design matrix with a trailing column of ones, row-major [N, D+1].
std::vector<double> design(const Tensor& features, const Tensor& mean, const Tensor& scale) {
  const std::size_t n = features.dim(0), d = features.dim(1);
  std::vector<double> x(n * (d + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[i * (d + 1) + j] = (features.at(i, j) - mean[j]) / scale[j];
    x[i * (d + 1) + d] = 1.0;
  }
  return x;
}

// Largest eigenvalue of X^T X / N by power iteration.
double gram_spectral_norm(const std::vector<double>& x, std::size_t n, std::size_t p) {
  std::vector<double> v(p, 1.0 / std::sqrt(static_cast<double>(p))), xv(n), w(p);
  double lambda = 0.0;
  for (int it = 0; it < 100; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < p; ++j) s += x[i * p + j] * v[j];
      xv[i] = s;
    }
    std::fill(w.begin(), w.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < p; ++j) w[j] += x[i * p + j] * xv[i];
    }
    double norm = 0.0;
    for (double& e : w) {
      e /= static_cast<double>(n);
      norm += e * e;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    const double prev = lambda;
    lambda = norm;
    for (std::size_t j = 0; j < p; ++j) v[j] = w[j] / norm;
    if (std::abs(lambda - prev) <= 1e-9 * lambda) break;
  }
  return lambda;
}

// Mean loss gradient wrt theta [p, K] (last row is the bias) plus L2 on the
// weight rows.
void objective_gradient(const std::vector<double>& x, std::span<const int> y, std::size_t p, std::size_t k,
                        LinearLoss loss, double l2, const std::vector<double>& theta, std::vector<double>& grad) {
  const std::size_t n = y.size();
  std::fill(grad.begin(), grad.end(), 0.0);
  std::vector<double> s(k), ds(k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.data() + i * p;
    std::fill(s.begin(), s.end(), 0.0);
    for (std::size_t j = 0; j < p; ++j) {
      const double v = xi[j];
      const double* row = theta.data() + j * k;
      for (std::size_t c = 0; c < k; ++c) s[c] += v * row[c];
    }
    const auto yi = static_cast<std::size_t>(y[i]);
    if (loss == LinearLoss::kLogistic) {
      const double m = *std::max_element(s.begin(), s.end());
      double z = 0.0;
      for (std::size_t c = 0; c < k; ++c) z += std::exp(s[c] - m);
      for (std::size_t c = 0; c < k; ++c) ds[c] = std::exp(s[c] - m) / z - (c == yi ? 1.0 : 0.0);
    } else {
      for (std::size_t c = 0; c < k; ++c) {
        const double t = c == yi ? 1.0 : -1.0;
        const double margin = 1.0 - t * s[c];
        ds[c] = margin > 0.0 ? -2.0 * t * margin : 0.0;
      }
    }
    for (std::size_t j = 0; j < p; ++j) {
      const double v = xi[j];
      double* row = grad.data() + j * k;
      for (std::size_t c = 0; c < k; ++c) row[c] += v * ds[c];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t c = 0; c < k; ++c) {
      double& g = grad[j * k + c];
      g *= inv_n;
      if (j + 1 < p) g += l2 * theta[j * k + c];
    }
  }
}

}  // namespace

const char* linear_loss_name(LinearLoss loss) noexcept {
  return loss == LinearLoss::kLogistic ? "logistic" : "hinge";
}

LinearLoss parse_linear_loss(const std::string& name) {
  if (name == "logistic") return LinearLoss::kLogistic;
  if (name == "hinge" || name == "svm") return LinearLoss::kHinge;
  throw ConfigError("unknown linear classifier loss '" + name + "' (expected logistic or hinge)");
}

void LinearClassifier::fit(const Tensor& features, std::span<const int> labels, std::size_t classes,
                           const LinearClassifierConfig& config) {
  if (features.rank() != 2) throw ConfigError("linear classifier: features must be [N,D]");
  const std::size_t n = features.dim(0), d = features.dim(1);
  if (labels.size() != n) throw ConfigError("linear classifier: feature and label counts differ");
  if (classes < 2) throw ConfigError("linear classifier: need at least 2 classes");
  if (n < classes) {
    throw ConfigError("linear classifier: need at least one labeled sample per class (N=" + std::to_string(n) +
                      " < K=" + std::to_string(classes) + ")");
  }
  require_all_classes(labels, classes, "linear classifier");
  if (config.max_iterations < 1 || config.l2 < 0.0) throw ConfigError("linear classifier: bad optimizer config");

  dim_ = d;
  classes_ = classes;
  loss_ = config.loss;
  mean_ = Tensor({d});
  scale_ = Tensor({d});
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += features.at(i, j);
    m /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sq += (features.at(i, j) - m) * (features.at(i, j) - m);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    mean_[j] = static_cast<float>(m);
    scale_[j] = sd > 1e-8 ? static_cast<float>(sd) : 1.0f;
  }

  const std::size_t p = d + 1;
  const std::vector<double> x = design(features, mean_, scale_);
  const double curvature = config.loss == LinearLoss::kLogistic ? 0.5 : 2.0;
  const double lipschitz = curvature * gram_spectral_norm(x, n, p) + config.l2;
  const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

  // Nesterov acceleration with adaptive restart when the gradient opposes the momentum.
  std::vector<double> theta(p * classes, 0.0), prev = theta, look = theta, grad(p * classes);
  double t = 1.0;
  iterations_ = 0;
  for (int it = 0; it < config.max_iterations; ++it) {
    objective_gradient(x, labels, p, classes, config.loss, config.l2, look, grad);
    double gnorm = 0.0;
    for (double g : grad) gnorm += g * g;
    iterations_ = it + 1;
    if (std::sqrt(gnorm) < config.tolerance) {
      theta = look;
      break;
    }
    prev.swap(theta);
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = look[i] - step * grad[i];
    double align = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) align += grad[i] * (theta[i] - prev[i]);
    if (align > 0.0) t = 1.0;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < theta.size(); ++i) look[i] = theta[i] + momentum * (theta[i] - prev[i]);
    t = t_next;
  }

  weight_ = Tensor({d, classes});
  bias_ = Tensor({classes});
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t c = 0; c < classes; ++c) weight_.at(j, c) = static_cast<float>(theta[j * classes + c]);
  }
  for (std::size_t c = 0; c < classes; ++c) bias_[c] = static_cast<float>(theta[d * classes + c]);
  trained_ = true;
}

Tensor LinearClassifier::scores(const Tensor& features) const {
  if (!trained_) throw ConfigError("linear classifier used before fit");
  if (features.rank() != 2 || features.dim(1) != dim_) {
    throw ConfigError("linear classifier: expected features [N," + std::to_string(dim_) + "], got " +
                      shape_str(features.shape()));
  }
  const std::size_t n = features.dim(0);
  Tensor out({n, classes_});
  std::vector<double> s(classes_);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < classes_; ++c) s[c] = bias_[c];
    for (std::size_t j = 0; j < dim_; ++j) {
      const double v = (features.at(i, j) - mean_[j]) / static_cast<double>(scale_[j]);
      for (std::size_t c = 0; c < classes_; ++c) s[c] += v * weight_.at(j, c);
    }
    for (std::size_t c = 0; c < classes_; ++c) out.at(i, c) = static_cast<float>(s[c]);
  }
  return out;
}

std::vector<int> LinearClassifier::predict(const Tensor& features) const {
  return argmax_rows(scores(features).values(), classes_);
}

void LinearClassifier::append_to(nn::Checkpoint& checkpoint, const std::string& prefix) const {
  if (!trained_) throw ConfigError("cannot save an unfitted linear classifier");
  checkpoint.meta[prefix + ".loss"] = linear_loss_name(loss_);
  checkpoint.entries.emplace_back(prefix + ".weight", weight_);
  checkpoint.entries.emplace_back(prefix + ".bias", bias_);
  checkpoint.entries.emplace_back(prefix + ".mean", mean_);
  checkpoint.entries.emplace_back(prefix + ".scale", scale_);
}

LinearClassifier LinearClassifier::from_checkpoint(const nn::Checkpoint& checkpoint, const std::string& prefix) {
  LinearClassifier c;
  c.weight_ = checkpoint.entry(prefix + ".weight");
  c.bias_ = checkpoint.entry(prefix + ".bias");
  c.mean_ = checkpoint.entry(prefix + ".mean");
  c.scale_ = checkpoint.entry(prefix + ".scale");
  if (c.weight_.rank() != 2 || c.bias_.size() != c.weight_.dim(1) || c.mean_.size() != c.weight_.dim(0) ||
      c.scale_.size() != c.weight_.dim(0)) {
    throw DataError("checkpoint linear classifier '" + prefix + "' has inconsistent shapes");
  }
  c.dim_ = c.weight_.dim(0);
  c.classes_ = c.weight_.dim(1);
  c.loss_ = parse_linear_loss(checkpoint.meta_value(prefix + ".loss"));
  c.trained_ = true;
  return c;
}

}  // namespace ssvae::ssl
