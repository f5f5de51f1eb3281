#include <cmath>
#include <functional>

#include "doctest.h"
#include "ssvae/nn/autograd.hpp"
#include "ssvae/nn/grad_check.hpp"
#include "ssvae/nn/ops.hpp"
#include "ssvae/nn/param_store.hpp"
#include "test_util.hpp"

using namespace ssvae;
using namespace ssvae::nn;
using testutil::away_from_zero;
using testutil::probe;
using testutil::random_tensor;

namespace {

double check_all(ParamStore& store, const std::function<Var()>& f) {
  GradCheckOptions opt;
  opt.eps = 1e-3;
  opt.samples_per_entry = 64;
  const auto r = grad_check(f, store, opt);
  INFO("worst " << r.worst_entry << "[" << r.worst_index << "] analytic " << r.worst_analytic << " numeric "
                << r.worst_numeric);
  CHECK(r.checked > 0);
  CHECK(r.kink_fraction() <= 0.2);
  CHECK(r.max_relative_error <= 1e-3);
  return r.max_relative_error;
}

}  // namespace

TEST_CASE("grad_check on the quadratic example") {
  ParamStore store;
  auto& w = store.add("w", Tensor({1}, 3.0f));
  GradCheckOptions opt;
  opt.eps = 0.25;  // dyadic step: the central difference of w^2 is exact
  const auto r = grad_check([&] { Var v = param(w); return sum_all(mul(v, v)); }, store, opt);
  CHECK(r.max_relative_error <= 1e-6);
  CHECK(r.worst_analytic == doctest::Approx(6.0));
}

TEST_CASE("grad_check on sum of relu away from the kink") {
  ParamStore store;
  auto& w = store.add("w", Tensor({5}, std::vector<float>{0.5f, 1, 2, 3, 4}));
  store.zero_grad();
  backward(sum_all(relu(param(w))));
  for (float g : w.grad.values()) CHECK(g == 1.0f);
  check_all(store, [&] { return sum_all(relu(param(w))); });
}

TEST_CASE("dense gradient") {
  RngStream rng(1);
  ParamStore s;
  auto& x = s.add("x", random_tensor({3, 5}, rng));
  auto& w = s.add("w", random_tensor({5, 4}, rng));
  auto& b = s.add("b", random_tensor({4}, rng));
  Tensor r = random_tensor({3, 4}, rng, 0.3f);
  check_all(s, [&] { return probe(dense(param(x), param(w), param(b)), r); });
}

TEST_CASE("conv1d gradient with stride and padding") {
  RngStream rng(2);
  ParamStore s;
  auto& x = s.add("x", random_tensor({2, 3, 11}, rng));
  auto& w = s.add("w", random_tensor({4, 3, 3}, rng));
  auto& b = s.add("b", random_tensor({4}, rng));
  Tensor r = random_tensor({2, 4, 6}, rng, 0.3f);
  check_all(s, [&] { return probe(add_channel_bias(conv1d(param(x), param(w), 2, 1), param(b)), r); });
}

TEST_CASE("transpose_conv1d gradient") {
  RngStream rng(3);
  ParamStore s;
  auto& x = s.add("x", random_tensor({2, 3, 5}, rng));
  auto& w = s.add("w", random_tensor({3, 2, 4}, rng));
  Tensor r = random_tensor({2, 2, 12}, rng, 0.3f);
  check_all(s, [&] { return probe(transpose_conv1d(param(x), param(w), 2), r); });
}

TEST_CASE("batch norm gradient in training and evaluation mode") {
  RngStream rng(4);
  ParamStore s;
  auto& x = s.add("x", random_tensor({4, 3, 6}, rng));
  auto& g = s.add("g", away_from_zero({3}, rng, 0.5f, 1.5f));
  auto& b = s.add("b", random_tensor({3}, rng));
  Tensor rm({3}), rv({3}, 1.0f);
  Tensor r = random_tensor({4, 3, 6}, rng, 0.3f);
  check_all(s, [&] {
    BatchNormState st{&rm, &rv, 0.9f, 1e-5f};
    return probe(batch_norm(param(x), param(g), param(b), st, true), r);
  });
  Tensor em({3}, 0.2f), ev({3}, 1.7f);
  check_all(s, [&] {
    BatchNormState st{&em, &ev, 0.9f, 1e-5f};
    return probe(batch_norm(param(x), param(g), param(b), st, false), r);
  });
  // 2-D input form.
  ParamStore s2;
  auto& x2 = s2.add("x", random_tensor({6, 3}, rng));
  auto& g2 = s2.add("g", Tensor({3}, 1.0f));
  auto& b2 = s2.add("b", Tensor({3}));
  Tensor r2 = random_tensor({6, 3}, rng, 0.3f);
  check_all(s2, [&] {
    BatchNormState st{&rm, &rv, 0.9f, 1e-5f};
    return probe(batch_norm(param(x2), param(g2), param(b2), st, true), r2);
  });
}

TEST_CASE("max pool gradient on distinct inputs") {
  RngStream rng(5);
  ParamStore s;
  Tensor init({2, 2, 8});
  auto perm = rng.permutation(init.size());
  for (std::size_t i = 0; i < init.size(); ++i) init[i] = 0.1f * static_cast<float>(perm[i]);
  auto& x = s.add("x", init);
  Tensor r = random_tensor({2, 2, 4}, rng);
  check_all(s, [&] { return probe(max_pool1d(param(x), 2), r); });
}

TEST_CASE("relu and dropout-in-eval gradients") {
  RngStream rng(6);
  ParamStore s;
  auto& x = s.add("x", away_from_zero({3, 7}, rng, 0.05f, 2.0f));
  Tensor r = random_tensor({3, 7}, rng);
  check_all(s, [&] { return probe(relu(param(x)), r); });
  RngStream drop(0);
  check_all(s, [&] { return probe(dropout(param(x), 0.25f, drop, false), r); });
}

TEST_CASE("dropout gradient in training mode with a pinned mask") {
  RngStream rng(7);
  ParamStore s;
  auto& x = s.add("x", random_tensor({3, 7}, rng));
  Tensor r = random_tensor({3, 7}, rng);
  check_all(s, [&] {
    RngStream drop(123);
    return probe(dropout(param(x), 0.25f, drop, true), r);
  });
}

TEST_CASE("softmax and log_softmax gradients") {
  RngStream rng(8);
  ParamStore s;
  auto& x = s.add("x", random_tensor({3, 5}, rng));
  Tensor r = random_tensor({3, 5}, rng);
  check_all(s, [&] { return probe(softmax(param(x)), r); });
  check_all(s, [&] { return probe(log_softmax(param(x)), r); });
}

TEST_CASE("elementwise and structural op gradients") {
  RngStream rng(9);
  ParamStore s;
  auto& a = s.add("a", random_tensor({3, 4}, rng, 0.5f));
  auto& b = s.add("b", away_from_zero({3, 4}, rng, 0.5f, 2.0f));
  auto& c = s.add("c", random_tensor({3, 2}, rng));
  Tensor r34 = random_tensor({3, 4}, rng);
  Tensor r36 = random_tensor({3, 6}, rng);
  Tensor r64 = random_tensor({6, 4}, rng);
  Tensor r43 = random_tensor({4, 3}, rng);
  Tensor r3 = random_tensor({3}, rng);
  Tensor r32 = random_tensor({3, 2}, rng);
  std::vector<int> labels{0, 3, 2};
  check_all(s, [&] { return probe(exp(param(a)), r34); });
  check_all(s, [&] { return probe(log(mul(param(b), param(b))), r34); });
  check_all(s, [&] { return probe(mul(param(a), param(b)), r34); });
  check_all(s, [&] { return probe(sub(add(param(a), param(b)), scale(param(a), 3.0f)), r34); });
  check_all(s, [&] { return probe(clamp(param(a), -10.0f, 10.0f), r34); });
  check_all(s, [&] { return probe(concat_cols(param(c), param(a)), r36); });
  check_all(s, [&] { return probe(tile_rows(param(a), 2), r64); });
  check_all(s, [&] { return probe(transpose2d(param(a)), r43); });
  check_all(s, [&] { return probe(sum_rows(param(a)), r3); });
  check_all(s, [&] { return probe(pick(param(a), labels), r3); });
  check_all(s, [&] { return probe(slice_cols(param(a), 1, 3), r32); });
  check_all(s, [&] { return probe(broadcast_cols(sum_rows(param(c)), 4), r34); });
  check_all(s, [&] { return mean_all(mul(param(a), param(a))); });
  check_all(s, [&] { return probe(reshape(param(a), {4, 3}), r43); });
}
