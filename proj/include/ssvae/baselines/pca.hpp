#pragma once

// Principal components of the training segments followed by a linear
// classifier on the labeled projections ("PCA+SVM").

#include <filesystem>
#include <span>
#include <vector>

#include "ssvae/ssl/linear_classifier.hpp"
#include "ssvae/tensor.hpp"

namespace ssvae::baselines {

struct PcaModel {
  Tensor mean;        // [D]
  Tensor components;  // [D,k], orthonormal columns, by decreasing variance
  Tensor variances;   // [k] eigenvalues of the sample covariance
  std::size_t k() const { return components.rank() == 2 ? components.dim(1) : 0; }
  std::size_t input_dim() const { return mean.size(); }
};

/// Top-k eigenvectors of the covariance of segments [N,D] (computed in
/// double). Throws ConfigError when k is 0 or exceeds the numerical rank.
PcaModel pca_fit(const Tensor& segments, std::size_t k);

/// (x - mean) * components -> [N,k].
Tensor pca_transform(const PcaModel& model, const Tensor& x);
/// mean + codes * components^T -> [N,D].
Tensor pca_inverse(const PcaModel& model, const Tensor& codes);

struct PcaClassifier {
  PcaModel pca;
  ssl::LinearClassifier classifier;
};

/// PCA on all training segments, classifier on the labeled projections.
PcaClassifier pca_fit_transform(const Tensor& all_segments, std::size_t k, const Tensor& labeled_segments,
                                std::span<const int> labels, std::size_t classes,
                                const ssl::LinearClassifierConfig& config = {});

std::vector<int> predict(const PcaClassifier& model, const Tensor& x);

/// Checkpoint tagged "pca".
void save_pca(const PcaClassifier& model, const std::filesystem::path& path);
PcaClassifier load_pca(const std::filesystem::path& path);

}  // namespace ssvae::baselines
