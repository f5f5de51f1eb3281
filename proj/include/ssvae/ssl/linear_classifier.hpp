#pragma once

// Linear classifier on fixed feature vectors, used by M1 and the PCA / AE
// baselines. Features are standardized with the training mean and standard
// deviation, then scored as s = x_std * W + b.
//
//   logistic: multinomial cross-entropy
//   hinge:    one-vs-rest squared hinge, sum_k max(0, 1 - t_k s_k)^2 with
//             t_k = +1 for the true class and -1 otherwise
//
// Both objectives carry an L2 penalty on W, are convex, and are minimized by
// accelerated full-batch gradient descent with step 1 / Lipschitz bound, so
// the fit is deterministic and needs no seed.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ssvae/nn/checkpoint.hpp"
#include "ssvae/tensor.hpp"

namespace ssvae::ssl {

enum class LinearLoss { kLogistic, kHinge };

const char* linear_loss_name(LinearLoss loss) noexcept;
/// "logistic" or "hinge" (alias "svm"); throws ConfigError otherwise.
LinearLoss parse_linear_loss(const std::string& name);

struct LinearClassifierConfig {
  LinearLoss loss = LinearLoss::kLogistic;
  int max_iterations = 500;
  double l2 = 1e-4;
  /// Stops once the gradient norm falls below this.
  double tolerance = 1e-6;
};

class LinearClassifier {
 public:
  LinearClassifier() = default;

  /// features [N,D], labels in [0,K). Requires N >= K and every class present.
  void fit(const Tensor& features, std::span<const int> labels, std::size_t classes,
           const LinearClassifierConfig& config = {});

  /// Scores [N,K] for features [N,D].
  Tensor scores(const Tensor& features) const;
  std::vector<int> predict(const Tensor& features) const;

  bool trained() const { return trained_; }
  std::size_t classes() const { return classes_; }
  std::size_t input_dim() const { return dim_; }
  LinearLoss loss() const { return loss_; }
  int iterations() const { return iterations_; }

  /// Entries "<prefix>.weight|bias|mean|scale" and meta "<prefix>.loss".
  void append_to(nn::Checkpoint& checkpoint, const std::string& prefix) const;
  static LinearClassifier from_checkpoint(const nn::Checkpoint& checkpoint, const std::string& prefix);

 private:
  std::size_t dim_ = 0, classes_ = 0;
  LinearLoss loss_ = LinearLoss::kLogistic;
  Tensor weight_, bias_, mean_, scale_;
  int iterations_ = 0;
  bool trained_ = false;
};

}  // namespace ssvae::ssl
