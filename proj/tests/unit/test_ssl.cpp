#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "ssvae/error.hpp"
#include "ssvae/nn/grad_check.hpp"
#include "ssvae/nn/ops.hpp"
#include "ssvae/ssl/labels.hpp"
#include "ssvae/ssl/linear_classifier.hpp"
#include "ssvae/ssl/m1.hpp"
#include "ssvae/ssl/m2.hpp"
#include "objectives.hpp"
#include "test_util.hpp"

using namespace ssvae;
using namespace ssvae::ssl;
using testutil::random_tensor;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("ssvae_ssl_" + name);
}

// Two clusters per class in `dim` dimensions, centred at +-3 on axis 0.
Tensor blobs(std::size_t n, std::size_t dim, std::vector<int>& labels, std::uint64_t seed) {
  RngStream rng(seed);
  Tensor x({n, dim});
  labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % 2);
    for (std::size_t j = 0; j < dim; ++j) x.at(i, j) = static_cast<float>(rng.normal());
    x.at(i, 0) += labels[i] == 0 ? -3.0f : 3.0f;
  }
  return x;
}

// Noisy sinusoids, frequency set by class, each row z-normalized.
Tensor sine_classes(std::size_t n, std::size_t dim, std::size_t classes, std::vector<int>& labels,
                    std::uint64_t seed) {
  RngStream rng(seed);
  Tensor out({n, dim});
  labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i % classes);
    const double freq = 2.0 + 3.0 * labels[i];
    const double phase = 2.0 * std::numbers::pi * rng.uniform();
    double mean = 0.0, sq = 0.0;
    for (std::size_t t = 0; t < dim; ++t) {
      out.at(i, t) = static_cast<float>(std::sin(2.0 * std::numbers::pi * freq * t / dim + phase) + 0.1 * rng.normal());
      mean += out.at(i, t);
    }
    mean /= dim;
    for (std::size_t t = 0; t < dim; ++t) sq += (out.at(i, t) - mean) * (out.at(i, t) - mean);
    const double sd = std::sqrt(sq / dim);
    for (std::size_t t = 0; t < dim; ++t) out.at(i, t) = static_cast<float>((out.at(i, t) - mean) / sd);
  }
  return out;
}

Tensor one_hot_blocks(std::size_t blocks, std::size_t rows_per_block, std::size_t classes, int fixed = -1) {
  Tensor t({blocks * rows_per_block, classes});
  for (std::size_t c = 0; c < blocks; ++c) {
    for (std::size_t r = 0; r < rows_per_block; ++r) t.at(c * rows_per_block + r, fixed < 0 ? c : fixed) = 1.0f;
  }
  return t;
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double e : v) s += std::exp(e - m);
  return m + std::log(s);
}

}  // namespace

TEST_CASE("label helpers") {
  const std::vector<int> ok{0, 1, 2, 1};
  CHECK_NOTHROW(require_all_classes(ok, 3, "test"));
  try {
    require_all_classes(std::vector<int>{0, 0, 2}, 4, "test");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find('1') != std::string::npos);
    CHECK(msg.find('3') != std::string::npos);
  }
  CHECK_THROWS_AS(require_all_classes(std::vector<int>{0, 5}, 2, "test"), ConfigError);
  CHECK(accuracy(std::vector<int>{1, 2, 3}, std::vector<int>{1, 0, 3}) == doctest::Approx(2.0 / 3.0));
  CHECK(argmax_rows(std::vector<float>{1, 3, 3, 0, 0, 0}, 3) == std::vector<int>{1, 0});
}

TEST_CASE("linear classifier separates separable classes") {
  std::vector<int> y;
  Tensor x = blobs(200, 5, y, 1);
  for (LinearLoss loss : {LinearLoss::kLogistic, LinearLoss::kHinge}) {
    CAPTURE(linear_loss_name(loss));
    LinearClassifier clf;
    LinearClassifierConfig cfg;
    cfg.loss = loss;
    clf.fit(x, y, 2, cfg);
    CHECK(clf.trained());
    CHECK(accuracy(clf.predict(x), y) == 1.0);
    const Tensor s = clf.scores(x);
    CHECK(s.shape() == Shape{200, 2});
  }
  CHECK(parse_linear_loss("svm") == LinearLoss::kHinge);
  CHECK_THROWS_AS(parse_linear_loss("forest"), ConfigError);
}

TEST_CASE("linear classifier boundary cases and errors") {
  Tensor x({3, 2}, std::vector<float>{0, 0, 1, 0, 0, 1});
  LinearClassifier clf;
  CHECK_NOTHROW(clf.fit(x, std::vector<int>{0, 1, 2}, 3));
  CHECK(clf.predict(x) == std::vector<int>{0, 1, 2});
  CHECK_THROWS_AS(clf.fit(x, std::vector<int>{0, 1, 1}, 3), ConfigError);
  CHECK_THROWS_AS(clf.fit(Tensor({2, 2}), std::vector<int>{0, 1}, 3), ConfigError);
  LinearClassifier untrained;
  CHECK_THROWS_AS(untrained.predict(x), ConfigError);
}

TEST_CASE("linear classifier checkpoint round trip") {
  std::vector<int> y;
  Tensor x = blobs(60, 4, y, 2);
  LinearClassifier clf;
  clf.fit(x, y, 2, {LinearLoss::kHinge});
  nn::Checkpoint ck;
  ck.kind = "test";
  clf.append_to(ck, "svm");
  LinearClassifier back = LinearClassifier::from_checkpoint(ck, "svm");
  CHECK(back.loss() == LinearLoss::kHinge);
  CHECK(bit_identical(back.scores(x), clf.scores(x)));
}

TEST_CASE("m1 features and classifier") {
  std::vector<int> y;
  Tensor x = sine_classes(300, 64, 2, y, 3);
  vae::FitConfig cfg;
  cfg.batch_size = 50;
  cfg.epochs = 15;
  cfg.optimizer.lr = 2e-3f;
  cfg.beta.warmup_epochs = 3;
  cfg.seed = 4;

  M1Model untrained{vae::VaeModel(models::tiny_arch(), 5), {}};
  CHECK_THROWS_AS(m1_extract_features(untrained, x), ConfigError);
  CHECK_THROWS_AS(predict(untrained, x), ConfigError);

  const std::vector<std::size_t> lab_idx{0, 1, 2, 3, 4, 5, 6, 7};
  std::vector<int> y_l;
  for (auto i : lab_idx) y_l.push_back(y[i]);
  M1Model m = m1_fit(models::tiny_arch(), 5, x, gather_rows(x, lab_idx), y_l, 2, cfg);
  Tensor f = m1_extract_features(m, x);
  CHECK(f.shape() == Shape{300, 4});
  CHECK(bit_identical(f, m1_extract_features(m, x)));

  // Mean pairwise distance between classes exceeds that within classes.
  double within = 0.0, between = 0.0;
  std::size_t nw = 0, nb = 0;
  for (std::size_t i = 0; i < 300; ++i) {
    for (std::size_t j = i + 1; j < 300; ++j) {
      double d = 0.0;
      for (std::size_t k = 0; k < 4; ++k) d += (f.at(i, k) - f.at(j, k)) * (f.at(i, k) - f.at(j, k));
      d = std::sqrt(d);
      if (y[i] == y[j]) {
        within += d;
        ++nw;
      } else {
        between += d;
        ++nb;
      }
    }
  }
  CHECK(between / nb > within / nw);

  CHECK_THROWS_AS(m1_train_classifier(gather_rows(f, std::vector<std::size_t>{0, 2}), std::vector<int>{0, 0}, 2),
                  ConfigError);

  const auto path = temp_path("m1.ckpt");
  save_m1(m, path);
  M1Model back = load_m1(path);
  CHECK(predict(back, x) == predict(m, x));
  CHECK(vae::load_vae(path).trained());
  std::filesystem::remove(path);
}

TEST_CASE("m2 classifier posterior") {
  M2Model m(models::tiny_arch(), 4, 6);
  RngStream rng(7);
  Tensor x = random_tensor({10, 64}, rng);
  LabelPosterior p = m2_classify(m, x, 3);
  CHECK(p.probs.shape() == Shape{10, 4});
  for (std::size_t i = 0; i < 10; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(p.probs.at(i, k) >= 0.0f);
      CHECK(p.probs.at(i, k) <= 1.0f);
      s += p.probs.at(i, k);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("zeroed output layer gives uniform rows") {
    m.classifier().output_layer().weight().value.fill(0.0f);
    m.classifier().output_layer().bias().value.fill(0.0f);
    LabelPosterior u = m2_classify(m, x);
    for (float v : u.probs.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-6));
  }
  SUBCASE("argmax is invariant under increasing transforms of the logits") {
    Tensor logits = m2_logits(m, nn::constant(x), {}).value();
    const std::vector<int> base = argmax_rows(m2_classify(m, x).probs.values(), 4);
    CHECK(base == argmax_rows(logits.values(), 4));
    for (int t = 0; t < 3; ++t) {
      Tensor g = logits;
      for (auto& v : g.values()) {
        v = t == 0 ? std::exp(v) : t == 1 ? v * v * v + 2.0f * v : 5.0f * v - 7.0f;
      }
      CHECK(argmax_rows(g.values(), 4) == base);
    }
  }
}

TEST_CASE("m2 alpha and prior") {
  CHECK(m2_default_alpha(516) == doctest::Approx(51.6));
  M2Model m(models::tiny_arch(), 10);
  CHECK(std::accumulate(m.prior().begin(), m.prior().end(), 0.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(m.set_alpha(-1.0f), ConfigError);
  CHECK_THROWS_AS(M2Model(models::tiny_arch(), 1), ConfigError);
}

TEST_CASE("categorical entropy bounds") {
  RngStream rng(8);
  Tensor uniform({3, 10});
  Var h = categorical_entropy(nn::constant(uniform));
  for (float v : h.value().values()) CHECK(v == doctest::Approx(std::log(10.0)).epsilon(1e-6));
  Var r = categorical_entropy(nn::constant(random_tensor({50, 6}, rng, 5.0f)));
  for (float v : r.value().values()) {
    CHECK(v >= -1e-6f);
    CHECK(v <= std::log(6.0f) + 1e-6f);
  }
  Tensor peaked({1, 3}, std::vector<float>{200.0f, 0.0f, 0.0f});
  CHECK(categorical_entropy(nn::constant(peaked)).value()[0] == doctest::Approx(0.0).scale(1e-6));
}

TEST_CASE("m2 degenerate posteriors") {
  M2Model m(models::tiny_arch(), 3, 9, 2.5f);
  RngStream rng(10);
  Tensor x = random_tensor({5, 64}, rng);
  Tensor eps = random_tensor({2, 5, 4}, rng);
  // Zero weights with a dominant bias make q(y|x) one-hot at class 1.
  m.classifier().output_layer().weight().value.fill(0.0f);
  m.classifier().output_layer().bias().value = Tensor({3}, std::vector<float>{0.0f, 200.0f, 0.0f});

  UnlabeledTerms u = m2_unlabeled_terms(m, nn::constant(x), 1.0f, eps, {});
  LabeledTerms l = m2_labeled_terms(m, nn::constant(x), std::vector<int>(5, 1), 1.0f, eps, {});
  for (std::size_t b = 0; b < 5; ++b) {
    CHECK(u.entropy.value()[b] == doctest::Approx(0.0).scale(1e-6));
    CHECK(u.u.value()[b] == doctest::Approx(u.l_per_class.value().at(b, 1)).epsilon(1e-6));
    CHECK(u.l_per_class.value().at(b, 1) == doctest::Approx(l.l.value()[b]).epsilon(1e-6));
    CHECK(l.cls.value()[b] == doctest::Approx(0.0).scale(1e-6));
  }
  m.set_alpha(0.0f);
  LabeledTerms l0 = m2_labeled_terms(m, nn::constant(x), std::vector<int>{0, 1, 2, 0, 1}, 1.0f, eps, {});
  for (float v : l0.cls.value().values()) CHECK(v == 0.0f);
  CHECK_THROWS_AS(m2_labeled_terms(m, nn::constant(x), std::vector<int>{0, 1, 3, 0, 1}, 1.0f, eps, {}), ConfigError);
}

TEST_CASE("m2 class-sum form equals direct expectation at pinned noise") {
  const std::size_t k = 4, b = 6, samples = 3;
  M2Model m(testutil::micro_arch(), k, 11, 1.0f);
  RngStream rng(12);
  testutil::jitter_offsets(m.params(), rng);
  Tensor x = random_tensor({b, 16}, rng);
  Tensor eps = random_tensor({samples, b, 3}, rng);
  const float beta = 0.6f;
  UnlabeledTerms u = m2_unlabeled_terms(m, nn::constant(x), beta, eps, {});

  const std::vector<double> direct = testutil::m2_unlabeled_direct(m, x, eps, beta);
  for (std::size_t i = 0; i < b; ++i) {
    CHECK(std::abs(-static_cast<double>(u.u.value()[i]) - direct[i]) <= 1e-5);
  }
}

TEST_CASE("m2 objective gradient with pinned noise") {
  M2Model m(testutil::micro_arch(), 3, 13, 1.5f);
  RngStream rng(14);
  testutil::jitter_offsets(m.params(), rng);
  Tensor xl = random_tensor({4, 16}, rng), xu = random_tensor({4, 16}, rng);
  const std::vector<int> y{0, 2, 1, 2};
  Tensor eps_l = random_tensor({2, 4, 3}, rng), eps_u = random_tensor({1, 4, 3}, rng);
  const float beta = 0.8f;

  RngStream d0(15), d1(15);
  const double total = m2_objective(m, xl, y, eps_l, xu, eps_u, beta, {true, &d0}).values.total;
  const double summed = nn::sum_all(testutil::m2_objective_terms(m, xl, y, eps_l, xu, eps_u, beta, d1)).value()[0];
  const double constant = 2.0 * (8.0 * kLog2Pi + std::log(3.0) - 0.5 * beta * 3);
  CHECK(total == doctest::Approx(summed + constant).epsilon(1e-5));

  nn::GradCheckOptions opt;
  opt.samples_per_entry = 24;
  opt.eps = 3e-3;
  const auto r = nn::grad_check(
      [&] {
        RngStream drop(15);
        return testutil::m2_objective_terms(m, xl, y, eps_l, xu, eps_u, beta, drop);
      },
      m.params(), opt);
  INFO("worst " << r.worst_entry << "[" << r.worst_index << "] " << r.worst_analytic << " vs " << r.worst_numeric);
  CHECK(r.checked > 0);
  CHECK(r.kink_fraction() <= 0.2);
  CHECK(r.max_relative_error <= 1e-3);

  SUBCASE("analytic gradient of the objective equals that of the terms") {
    m.params().zero_grad();
    RngStream a(15);
    nn::backward(m2_objective(m, xl, y, eps_l, xu, eps_u, beta, {true, &a}).total);
    std::map<std::string, Tensor> from_obj;
    for (auto& [name, e] : m.params()) from_obj[name] = e.grad;
    m.params().zero_grad();
    RngStream c(15);
    nn::backward(nn::sum_all(testutil::m2_objective_terms(m, xl, y, eps_l, xu, eps_u, beta, c)));
    for (auto& [name, e] : m.params()) {
      if (!e.trainable) continue;
      for (std::size_t i = 0; i < e.grad.size(); ++i) {
        REQUIRE(e.grad[i] == doctest::Approx(from_obj[name][i]).epsilon(1e-4).scale(1e-3));
      }
    }
  }
}

TEST_CASE("m2 objective composition") {
  M2Model m(models::tiny_arch(), 3, 16, 0.3f);
  RngStream rng(17);
  Tensor xl = random_tensor({4, 64}, rng), xu = random_tensor({5, 64}, rng);
  const std::vector<int> y{0, 1, 2, 0};
  Tensor eps_l = random_tensor({1, 4, 4}, rng), eps_u = random_tensor({1, 5, 4}, rng);
  auto obj = m2_objective(m, xl, y, eps_l, xu, eps_u, 1.0f, {});
  auto lt = m2_labeled_terms(m, nn::constant(xl), y, 1.0f, eps_l, {});
  auto ut = m2_unlabeled_terms(m, nn::constant(xu), 1.0f, eps_u, {});
  CHECK(obj.values.l_labeled == doctest::Approx(nn::mean_all(lt.l).value()[0]).epsilon(1e-6));
  CHECK(obj.values.cls_term == doctest::Approx(nn::mean_all(lt.cls).value()[0]).epsilon(1e-6));
  CHECK(obj.values.u_unlabeled == doctest::Approx(nn::mean_all(ut.u).value()[0]).epsilon(1e-6));
  CHECK(obj.values.total ==
        doctest::Approx(obj.values.l_labeled + obj.values.cls_term + obj.values.u_unlabeled).epsilon(1e-6));

  auto only_l = m2_objective(m, xl, y, eps_l, Tensor(), Tensor(), 1.0f, {});
  CHECK(only_l.values.u_unlabeled == 0.0);
  CHECK(only_l.values.total == doctest::Approx(obj.values.l_labeled + obj.values.cls_term).epsilon(1e-6));
  CHECK_THROWS_AS(m2_objective(m, xl, y, eps_l, xu, eps_u, 1.5f, {}), ConfigError);

  RngStream r1(18), r2(18);
  auto ls = m2_loss_labeled(m, xl, y, r1);
  CHECK(ls.total == doctest::Approx(ls.l_labeled + ls.cls_term));
  CHECK(std::isfinite(m2_loss_unlabeled(m, xu, r2)));
}

TEST_CASE("m2 training lowers the classification loss on separable data") {
  std::vector<int> y;
  Tensor x = sine_classes(200, 64, 2, y, 19);
  M2Model m(models::tiny_arch(), 2, 20, 50.0f);
  M2FitConfig cfg;
  cfg.batch_size = 20;
  cfg.epochs = 10;
  cfg.optimizer.lr = 1e-3f;
  cfg.beta.warmup_epochs = 2;
  cfg.seed = 21;
  std::vector<double> nll;
  cfg.on_epoch = [&](const M2EpochLog&) {
    Var log_q = nn::pick(nn::log_softmax(m2_logits(m, nn::constant(x), {})), y);
    nll.push_back(-nn::mean_all(log_q).value()[0]);
  };
  M2TrainingLog log = m2_fit(m, x, y, Tensor(), cfg);
  REQUIRE(log.epochs.size() == 10);
  REQUIRE(nll.size() == 10);
  int violations = 0;
  for (std::size_t e = 1; e < nll.size(); ++e) {
    if (nll[e] >= nll[e - 1]) ++violations;
  }
  INFO("first " << nll.front() << " last " << nll.back());
  CHECK(violations <= 1);
  CHECK(log.epochs.back().losses.u_unlabeled == 0.0);
  CHECK(accuracy(predict(m, x), y) >= 0.95);
  CHECK(m2_training_csv(log).starts_with("epoch,L_labeled,U_unlabeled,cls,total\n"));
}

TEST_CASE("m2 semi-supervised fit, prediction and checkpoint") {
  std::vector<int> y;
  Tensor x = sine_classes(160, 64, 2, y, 22);
  const std::vector<std::size_t> lab{0, 1, 2, 3, 4, 5};
  std::vector<std::size_t> unl(154);
  std::iota(unl.begin(), unl.end(), 6);
  std::vector<int> y_l;
  for (auto i : lab) y_l.push_back(y[i]);

  M2Model m(models::tiny_arch(), 2, 23, m2_default_alpha(lab.size()));
  CHECK_THROWS_AS(predict(m, x), ConfigError);
  M2FitConfig cfg;
  cfg.batch_size = 40;
  cfg.epochs = 3;
  cfg.optimizer.lr = 1e-3f;
  cfg.seed = 24;
  M2TrainingLog log = m2_fit(m, gather_rows(x, lab), y_l, gather_rows(x, unl), cfg);
  for (const auto& e : log.epochs) {
    CHECK(std::isfinite(e.losses.total));
    CHECK(e.losses.u_unlabeled != 0.0);
  }

  M2Model twin(models::tiny_arch(), 2, 23, m2_default_alpha(lab.size()));
  m2_fit(twin, gather_rows(x, lab), y_l, gather_rows(x, unl), cfg);
  for (auto& [name, e] : m.params()) CHECK(bit_identical(e.value, twin.params().get(name).value));

  const std::vector<int> pred = predict(m, x);
  std::vector<std::size_t> rev(160);
  std::iota(rev.rbegin(), rev.rend(), 0);
  const std::vector<int> pred_rev = predict(m, gather_rows(x, rev));
  for (std::size_t i = 0; i < 160; ++i) CHECK(pred_rev[i] == pred[rev[i]]);

  const auto path = temp_path("m2.ckpt");
  save_m2(m, path);
  M2Model back = load_m2(path);
  CHECK(back.alpha() == m.alpha());
  CHECK(back.trained());
  CHECK(bit_identical(m2_classify(back, x).probs, m2_classify(m, x).probs));
  CHECK(predict(back, x) == pred);
  CHECK_THROWS_AS(vae::load_vae(path), DataError);
  std::filesystem::remove(path);

  CHECK_THROWS_AS(m2_fit(m, gather_rows(x, lab), std::vector<int>{0, 1, 0, 1, 0, 5}, Tensor(), cfg), ConfigError);
}
