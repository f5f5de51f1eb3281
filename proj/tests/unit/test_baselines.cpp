#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "ssvae/baselines/autoencoder.hpp"
#include "ssvae/baselines/cnn.hpp"
#include "ssvae/baselines/pca.hpp"
#include "ssvae/error.hpp"
#include "ssvae/ssl/labels.hpp"
#include "ssvae/ssl/m2.hpp"
#include "test_util.hpp"

using namespace ssvae;
using namespace ssvae::baselines;
using testutil::random_tensor;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ssvae_base_" + name);
}

// Cyclic Jacobi eigendecomposition of a symmetric matrix; returns
// eigenvalues and column eigenvectors sorted by decreasing eigenvalue.
void jacobi_eigen(std::vector<double> a, std::size_t n, std::vector<double>& values, std::vector<double>& vectors) {
  vectors.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) vectors[i * n + i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p * n + q] * a[p * n + q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a[p * n + q];
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k * n + p], akq = a[k * n + q];
          a[k * n + p] = c * akp - s * akq;
          a[k * n + q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p * n + k], aqk = a[q * n + k];
          a[p * n + k] = c * apk - s * aqk;
          a[q * n + k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vectors[k * n + p], vkq = vectors[k * n + q];
          vectors[k * n + p] = c * vkp - s * vkq;
          vectors[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a[x * n + x] > a[y * n + y]; });
  std::vector<double> sorted(n * n);
  values.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    values[c] = a[order[c] * n + order[c]];
    for (std::size_t r = 0; r < n; ++r) sorted[r * n + c] = vectors[r * n + order[c]];
  }
  vectors = std::move(sorted);
}

// Anisotropic Gaussian data: column j scaled by (j + 1).
Tensor stretched(std::size_t n, std::size_t d, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor x({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x.at(i, j) = static_cast<float>(rng.normal() * (j + 1) + 0.5 * j);
  return x;
}

double reconstruction_error(const PcaModel& m, const Tensor& x) {
  Tensor back = pca_inverse(m, pca_transform(m, x));
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - back[i]) * (x[i] - back[i]);
  return s / static_cast<double>(x.size());
}

Tensor sine_classes(std::size_t n, std::size_t dim, std::size_t classes, std::vector<int>& labels,
                    std::uint64_t seed) {
  RngStream rng(seed);
  Tensor out({n, dim});
  labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % classes);
    const double freq = 2.0 + 3.0 * labels[i];
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    for (std::size_t t = 0; t < dim; ++t) {
      out.at(i, t) = static_cast<float>(std::sqrt(2.0) * std::sin(2.0 * std::numbers::pi * freq * t / dim + phase) +
                                        0.1 * rng.normal());
    }
  }
  return out;
}

// tiny_arch with a classifier wide enough to separate four tones.
models::ArchConfig cnn_arch() {
  models::ArchConfig a = models::tiny_arch();
  a.classifier_convs = {{1, 8, 4, 2, 0}, {8, 8, 4, 2, 0}};
  return a;
}

}  // namespace

TEST_CASE("pca matches a Jacobi eigendecomposition of the covariance") {
  const std::size_t n = 400, d = 12;
  Tensor x = stretched(n, d, 1);
  PcaModel m = pca_fit(x, d);

  std::vector<double> mean(d, 0.0), cov(d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.at(i, j) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = 0; q < d; ++q) cov[p * d + q] += (x.at(i, p) - mean[p]) * (x.at(i, q) - mean[q]) / (n - 1.0);
  std::vector<double> values, vectors;
  jacobi_eigen(cov, d, values, vectors);

  for (std::size_t c = 0; c < d; ++c) {
    CHECK(m.variances[c] == doctest::Approx(values[c]).epsilon(1e-5));
    double dot = 0.0;
    for (std::size_t r = 0; r < d; ++r) dot += m.components.at(r, c) * vectors[r * d + c];
    const double sign = dot < 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < d; ++r) CHECK(std::abs(m.components.at(r, c) - sign * vectors[r * d + c]) <= 1e-4);
  }
  for (std::size_t j = 0; j < d; ++j) CHECK(m.mean[j] == doctest::Approx(mean[j]).epsilon(1e-6));
}

TEST_CASE("pca components are orthonormal at full size") {
  RngStream rng(2);
  Tensor x = random_tensor({300, 1024}, rng);
  PcaModel m = pca_fit(x, 128);
  CHECK(m.components.shape() == Shape{1024, 128});
  double worst = 0.0;
  for (std::size_t a = 0; a < 128; ++a) {
    for (std::size_t b = a; b < 128; ++b) {
      double dot = 0.0;
      for (std::size_t r = 0; r < 1024; ++r) dot += m.components.at(r, a) * m.components.at(r, b);
      worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  }
  CHECK(worst <= 1e-4);
  for (std::size_t c = 1; c < 128; ++c) CHECK(m.variances[c] <= m.variances[c - 1]);
  CHECK(pca_transform(m, x).shape() == Shape{300, 128});
}

TEST_CASE("pca reconstruction error falls with k and vanishes at full rank") {
  Tensor x = stretched(200, 16, 3);
  double prev = 1e300;
  for (std::size_t k = 1; k <= 16; ++k) {
    const double e = reconstruction_error(pca_fit(x, k), x);
    CHECK(e <= prev + 1e-9);
    prev = e;
  }
  CHECK(prev <= 1e-8);
}

TEST_CASE("pca degenerate geometry and errors") {
  RngStream rng(4);
  Tensor line({50, 2});
  for (std::size_t i = 0; i < 50; ++i) {
    const float t = static_cast<float>(rng.normal());
    line.at(i, 0) = t;
    line.at(i, 1) = 2.0f * t;
  }
  PcaModel m = pca_fit(line, 1);
  CHECK(std::abs(m.components.at(0, 0)) == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(1e-5));
  CHECK(std::abs(m.components.at(1, 0)) == doctest::Approx(2.0 / std::sqrt(5.0)).epsilon(1e-5));
  CHECK(reconstruction_error(m, line) <= 1e-10);
  CHECK_THROWS_AS(pca_fit(line, 2), ConfigError);

  Tensor few = random_tensor({5, 10}, rng);
  CHECK_NOTHROW(pca_fit(few, 4));
  CHECK_THROWS_AS(pca_fit(few, 5), ConfigError);
  CHECK_THROWS_AS(pca_fit(few, 0), ConfigError);
  CHECK_THROWS_AS(pca_fit(few, 11), ConfigError);
}

TEST_CASE("pca classifier fit, predict and checkpoint") {
  std::vector<int> y;
  Tensor x = sine_classes(120, 64, 3, y, 5);
  const std::vector<std::size_t> lab{0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> y_l;
  for (auto i : lab) y_l.push_back(y[i]);
  PcaClassifier m = pca_fit_transform(x, 8, gather_rows(x, lab), y_l, 3);
  const auto pred = predict(m, x);
  CHECK(pred.size() == 120);
  const auto path = temp_path("pca.ckpt");
  save_pca(m, path);
  PcaClassifier back = load_pca(path);
  CHECK(predict(back, x) == pred);
  CHECK(bit_identical(pca_transform(back.pca, x), pca_transform(m.pca, x)));
  std::filesystem::remove(path);
}

TEST_CASE("autoencoder code dimension and determinism") {
  AeModel full({}, 1);
  RngStream rng(6);
  Tensor x = random_tensor({3, 1024}, rng);
  CHECK(full.code_dim() == 128);
  CHECK(full.encode(nn::constant(x), {}).shape() == Shape{3, 128});
  CHECK(bit_identical(ae_codes(full, x), ae_codes(full, x)));
  CHECK(ae_reconstruct(full, x).shape() == Shape{3, 1024});
  Tensor zeros({2, 4});
  CHECK(mse(nn::constant(zeros), nn::constant(Tensor({2, 4}, 2.0f))).value()[0] == 4.0f);
}

TEST_CASE("autoencoder reconstruction error falls during training") {
  std::vector<int> y;
  Tensor x = sine_classes(300, 64, 2, y, 7);
  TrainConfig cfg;
  cfg.batch_size = 50;
  cfg.epochs = 8;
  cfg.optimizer.lr = 1e-3f;
  cfg.seed = 8;
  AeTrainingLog log;
  AeClassifier m = ae_fit_classifier(models::tiny_arch(), 9, x, gather_rows(x, std::vector<std::size_t>{0, 1, 2, 3}),
                                     std::vector<int>{0, 1, 0, 1}, 2, cfg, {}, &log);
  REQUIRE(log.epoch_mse.size() == 8);
  int increases = 0;
  for (std::size_t e = 1; e < log.epoch_mse.size(); ++e) increases += log.epoch_mse[e] > log.epoch_mse[e - 1];
  CHECK(increases <= 1);
  CHECK(log.epoch_mse.back() < log.epoch_mse.front());

  const auto path = temp_path("ae.ckpt");
  save_ae(m, path);
  AeClassifier back = load_ae(path);
  CHECK(bit_identical(ae_codes(back.ae, x), ae_codes(m.ae, x)));
  CHECK(predict(back, x) == predict(m, x));
  std::filesystem::remove(path);

  AeClassifier untrained{AeModel(models::tiny_arch()), {}};
  CHECK_THROWS_AS(predict(untrained, x), ConfigError);
}

TEST_CASE("cnn matches the M2 classifier topology") {
  CnnModel cnn({}, 10, 1);
  ssl::M2Model m2({}, 10, 1);
  for (auto& [name, e] : cnn.params()) {
    REQUIRE(m2.params().contains(name));
    CHECK(m2.params().get(name).value.shape() == e.value.shape());
    CHECK(bit_identical(m2.params().get(name).value, e.value));
  }
  RngStream rng(2);
  CHECK(cnn_probabilities(cnn, random_tensor({2, 1024}, rng)).shape() == Shape{2, 10});
}

TEST_CASE("cnn fits separable data on its labeled set") {
  std::vector<int> y;
  Tensor x = sine_classes(200, 64, 4, y, 10);
  CnnModel m(cnn_arch(), 4, 11);
  CHECK_THROWS_AS(predict(m, x), ConfigError);
  TrainConfig cfg;
  cfg.batch_size = 10;
  cfg.epochs = 10;
  cfg.optimizer.lr = 3e-3f;
  cfg.seed = 12;
  CnnTrainingLog log = cnn_fit(m, x, y, cfg);
  CHECK(log.epoch_loss.size() == 10);
  CHECK(log.epoch_loss.back() < log.epoch_loss.front());
  CHECK(ssl::accuracy(predict(m, x), y) >= 0.95);

  const auto path = temp_path("cnn.ckpt");
  save_cnn(m, path);
  CnnModel back = load_cnn(path);
  CHECK(bit_identical(cnn_probabilities(back, x), cnn_probabilities(m, x)));
  std::filesystem::remove(path);

  CnnModel other(cnn_arch(), 4, 11);
  CHECK_THROWS_AS(cnn_fit(other, gather_rows(x, std::vector<std::size_t>{0, 1, 2}), std::vector<int>{0, 1, 2}, cfg),
                  ConfigError);
}

TEST_CASE("cnn with fixed step count recycles a small labeled set") {
  std::vector<int> y;
  Tensor x = sine_classes(8, 64, 2, y, 13);
  CnnModel m(cnn_arch(), 2, 14);
  TrainConfig cfg;
  cfg.batch_size = 200;
  cfg.epochs = 10;
  cfg.steps_per_epoch = 5;
  cfg.optimizer.lr = 1e-3f;
  cnn_fit(m, x, y, cfg);
  CHECK(ssl::accuracy(predict(m, x), y) >= 0.99);
}
