#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ssvae/error.hpp"
#include "ssvae/nn/checkpoint.hpp"
#include "ssvae/nn/optim.hpp"
#include "ssvae/nn/param_store.hpp"
#include "test_util.hpp"

using namespace ssvae;
using namespace ssvae::nn;

TEST_CASE("rmsprop with zero gradient only decays the accumulator") {
  ParamStore s;
  auto& e = s.add("w", Tensor({3}, std::vector<float>{1, 2, 3}));
  e.accumulator.fill(0.5f);
  rmsprop_step(s, {0.1f, 0.9f, 1e-8f});
  CHECK(e.value == Tensor({3}, std::vector<float>{1, 2, 3}));
  for (float v : e.accumulator.values()) CHECK(v == doctest::Approx(0.45f));
}

TEST_CASE("rmsprop single step by hand") {
  ParamStore s;
  auto& e = s.add("w", Tensor({1}, 0.0f));
  e.grad[0] = 2.0f;
  rmsprop_step(s, {0.1f, 0.9f, 0.0f});
  CHECK(e.accumulator[0] == doctest::Approx(0.4f));
  CHECK(e.value[0] == doctest::Approx(-0.1 * 2 / std::sqrt(0.4)).epsilon(1e-6));
  CHECK(e.value[0] == doctest::Approx(-0.3162).epsilon(1e-4));
  CHECK(e.grad[0] == 0.0f);
  CHECK(RmsPropConfig{}.lr == 1e-4f);
}

TEST_CASE("rmsprop refuses non-finite gradients and leaves the store untouched") {
  ParamStore s;
  auto& a = s.add("a", Tensor({2}, 1.0f));
  auto& b = s.add("b", Tensor({2}, 1.0f));
  a.grad[0] = 1.0f;
  b.grad[1] = std::nanf("");
  try {
    rmsprop_step(s, {});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("b") != std::string::npos);
  }
  CHECK(a.value[0] == 1.0f);
  CHECK(a.accumulator[0] == 0.0f);
}

TEST_CASE("rmsprop skips non-trainable entries and keeps accumulators nonnegative") {
  ParamStore s;
  auto& t = s.add("t", Tensor({2}, 1.0f));
  auto& f = s.add("f", Tensor({2}, 1.0f), false);
  RngStream rng(3);
  for (int i = 0; i < 20; ++i) {
    t.grad = testutil::random_tensor({2}, rng);
    rmsprop_step(s, {});
    for (float v : t.accumulator.values()) REQUIRE(v >= 0.0f);
  }
  CHECK(f.value == Tensor({2}, 1.0f));
}

TEST_CASE("param store rejects duplicates and keeps shapes aligned") {
  ParamStore s;
  s.add("w", Tensor({2, 3}));
  CHECK_THROWS_AS(s.add("w", Tensor({1})), ConfigError);
  for (auto& [name, e] : s) {
    CHECK(e.grad.shape() == e.value.shape());
    CHECK(e.accumulator.shape() == e.value.shape());
  }
}

TEST_CASE("checkpoint round trip is bit exact") {
  RngStream rng(12);
  Checkpoint ck;
  ck.kind = "m2";
  ck.meta["latent_dim"] = "128";
  ck.meta["alpha"] = "51.6";
  Tensor special({4}, std::vector<float>{-0.0f, 1e-45f, std::numeric_limits<float>::max(), -3.25f});
  ck.entries.emplace_back("a.weight", testutil::random_tensor({3, 4, 5}, rng));
  ck.entries.emplace_back("b", special);
  const auto path = std::filesystem::temp_directory_path() / "ssvae_ck_roundtrip.bin";
  save_checkpoint(path, ck);
  auto back = load_checkpoint(path);
  CHECK(back.kind == "m2");
  CHECK(back.meta_size("latent_dim") == 128);
  CHECK(back.meta_double("alpha") == doctest::Approx(51.6));
  REQUIRE(back.entries.size() == 2);
  CHECK(bit_identical(back.entry("a.weight"), ck.entries[0].second));
  CHECK(bit_identical(back.entry("b"), special));

  std::ifstream in(path, std::ios::binary);
  std::string magic(8, '\0');
  in.read(magic.data(), 8);
  CHECK(magic == "SSVAE01\n");
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint errors") {
  const auto path = std::filesystem::temp_directory_path() / "ssvae_ck_bad.bin";
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOTVAE01\n";
  }
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  Checkpoint ck;
  ck.kind = "vae";
  ck.entries.emplace_back("w", Tensor({100}));
  save_checkpoint(path, ck);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 4);
  CHECK_THROWS_AS(load_checkpoint(path), DataError);
  std::filesystem::remove(path);

  ParamStore s;
  s.add("w", Tensor({3}));
  CHECK_THROWS_AS(restore_store(ck, s), DataError);
}
