#include "ssvae/baselines/pca.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ssvae/error.hpp"
#include "ssvae/nn/checkpoint.hpp"

namespace ssvae::baselines {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Eigenvalues below this fraction of the largest count as numerically zero.
constexpr double kRankTolerance = 1e-9;

void expect_rows(const PcaModel& model, const Tensor& x, std::size_t width, const char* who) {
  if (x.rank() != 2 || x.dim(1) != width) {
    throw ConfigError(std::string(who) + ": expected [N," + std::to_string(width) + "], got " + shape_str(x.shape()));
  }
  (void)model;
}

}  // namespace

PcaModel pca_fit(const Tensor& segments, std::size_t k) {
  if (segments.rank() != 2 || segments.dim(0) < 2) throw ConfigError("pca_fit: need at least two segments [N,D]");
  const std::size_t n = segments.dim(0), d = segments.dim(1);
  if (k == 0 || k > d) throw ConfigError("pca_fit: k must be in [1, " + std::to_string(d) + "]");

  RowMatrix x = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                    segments.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d))
                    .cast<double>();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / static_cast<double>(n - 1));
  cov = cov.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("pca_fit: eigendecomposition failed");
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const double top = values(d - 1);
  std::size_t rank = 0;
  for (std::size_t i = 0; i < d; ++i) rank += values(i) > kRankTolerance * top && values(i) > 0.0;
  if (k > rank) {
    throw ConfigError("pca_fit: k=" + std::to_string(k) + " exceeds the data rank " + std::to_string(rank));
  }

  PcaModel m;
  m.mean = Tensor({d});
  for (std::size_t j = 0; j < d; ++j) m.mean[j] = static_cast<float>(mean(j));
  m.components = Tensor({d, k});
  m.variances = Tensor({k});
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t src = d - 1 - c;
    Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(src));
    // Sign convention: the largest-magnitude entry is positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    for (std::size_t j = 0; j < d; ++j) m.components.at(j, c) = static_cast<float>(v(j));
    m.variances[c] = static_cast<float>(values(src));
  }
  return m;
}

namespace {

using FloatRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const FloatRows> rows_of(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1))};
}

}  // namespace

Tensor pca_transform(const PcaModel& model, const Tensor& x) {
  const std::size_t d = model.input_dim(), k = model.k();
  expect_rows(model, x, d, "pca_transform");
  const Eigen::RowVectorXd mean = Eigen::Map<const Eigen::RowVectorXf>(model.mean.data(), d).cast<double>();
  const RowMatrix centered = rows_of(x).cast<double>().rowwise() - mean;
  const RowMatrix codes = centered * rows_of(model.components).cast<double>();
  Tensor out({x.dim(0), k});
  Eigen::Map<FloatRows>(out.data(), codes.rows(), codes.cols()) = codes.cast<float>();
  return out;
}

Tensor pca_inverse(const PcaModel& model, const Tensor& codes) {
  const std::size_t d = model.input_dim(), k = model.k();
  expect_rows(model, codes, k, "pca_inverse");
  const Eigen::RowVectorXd mean = Eigen::Map<const Eigen::RowVectorXf>(model.mean.data(), d).cast<double>();
  const RowMatrix back =
      (rows_of(codes).cast<double>() * rows_of(model.components).cast<double>().transpose()).rowwise() + mean;
  Tensor out({codes.dim(0), d});
  Eigen::Map<FloatRows>(out.data(), back.rows(), back.cols()) = back.cast<float>();
  return out;
}

PcaClassifier pca_fit_transform(const Tensor& all_segments, std::size_t k, const Tensor& labeled_segments,
                                std::span<const int> labels, std::size_t classes,
                                const ssl::LinearClassifierConfig& config) {
  PcaClassifier m{pca_fit(all_segments, k), {}};
  m.classifier.fit(pca_transform(m.pca, labeled_segments), labels, classes, config);
  return m;
}

std::vector<int> predict(const PcaClassifier& model, const Tensor& x) {
  if (!model.classifier.trained()) throw ConfigError("PCA classifier is untrained");
  return model.classifier.predict(pca_transform(model.pca, x));
}

void save_pca(const PcaClassifier& model, const std::filesystem::path& path) {
  nn::Checkpoint ck;
  ck.kind = "pca";
  ck.meta["k"] = std::to_string(model.pca.k());
  ck.entries.emplace_back("pca.mean", model.pca.mean);
  ck.entries.emplace_back("pca.components", model.pca.components);
  ck.entries.emplace_back("pca.variances", model.pca.variances);
  model.classifier.append_to(ck, "svm");
  nn::save_checkpoint(path, ck);
}

PcaClassifier load_pca(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.kind != "pca") throw DataError("checkpoint " + path.string() + " holds '" + ck.kind + "', expected pca");
  PcaClassifier m;
  m.pca.mean = ck.entry("pca.mean");
  m.pca.components = ck.entry("pca.components");
  m.pca.variances = ck.entry("pca.variances");
  if (m.pca.components.rank() != 2 || m.pca.components.dim(0) != m.pca.mean.size()) {
    throw DataError("checkpoint " + path.string() + ": inconsistent PCA shapes");
  }
  m.classifier = ssl::LinearClassifier::from_checkpoint(ck, "svm");
  return m;
}

}  // namespace ssvae::baselines
