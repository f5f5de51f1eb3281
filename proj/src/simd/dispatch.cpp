#include <atomic>
#include <cstdlib>
#include <string>
#include <vector>

#include "kernels_impl.hpp"
#include "ssvae/error.hpp"
#include "ssvae/simd/kernels.hpp"

namespace ssvae::simd {

namespace detail {
#ifndef SSVAE_HAVE_AVX2
const KernelTable* avx2_kernels() noexcept { return nullptr; }
#endif
}  // namespace detail

namespace {

bool cpu_has_avx2() noexcept {
#if defined(SSVAE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__)) && \
    (defined(__x86_64__) || defined(__i386__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Level initial_level() noexcept {
  Level level = detect_level();
  if (const char* env = std::getenv("SSVAE_SIMD")) {
    if (auto requested = parse_level(env); requested && level_available(*requested)) level = *requested;
  }
  return level;
}

std::atomic<Level>& level_slot() noexcept {
  static std::atomic<Level> slot{initial_level()};
  return slot;
}

const detail::KernelTable& table() noexcept {
  if (level_slot().load(std::memory_order_relaxed) == Level::kAvx2) return *detail::avx2_kernels();
  return detail::scalar_kernels();
}

}  // namespace

bool level_available(Level level) noexcept {
  if (level == Level::kScalar) return true;
  return detail::avx2_kernels() != nullptr && cpu_has_avx2();
}

Level detect_level() noexcept { return level_available(Level::kAvx2) ? Level::kAvx2 : Level::kScalar; }

Level active_level() noexcept { return level_slot().load(std::memory_order_relaxed); }

void set_active_level(Level level) {
  if (!level_available(level)) {
    throw ConfigError(std::string("SIMD level ") + level_name(level) + " is not available on this machine");
  }
  level_slot().store(level, std::memory_order_relaxed);
}

const char* level_name(Level level) noexcept { return level == Level::kAvx2 ? "avx2" : "scalar"; }

std::optional<Level> parse_level(std::string_view name) noexcept {
  if (name == "scalar") return Level::kScalar;
  if (name == "avx2") return Level::kAvx2;
  return std::nullopt;
}

void sgemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
           const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
           std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (active_level() == Level::kScalar) {
    detail::scalar_sgemm(trans_a == Trans::kYes, trans_b == Trans::kYes, m, n, k, alpha, a, lda, b,
                         ldb, beta, c, ldc);
    return;
  }
  for (std::size_t i = 0; i < m; ++i) {
    float* row = c + i * ldc;
    if (beta == 0.0f) {
      for (std::size_t j = 0; j < n; ++j) row[j] = 0.0f;
    } else if (beta != 1.0f) {
      for (std::size_t j = 0; j < n; ++j) row[j] *= beta;
    }
  }
  if (k == 0) return;
  // Long reductions against a transposed B run as row dot products, which
  // read both operands contiguously instead of packing a large B^T.
  if (trans_a == Trans::kNo && trans_b == Trans::kYes && k >= 4 * n && k >= 4096 && table().gemm_nt_acc) {
    table().gemm_nt_acc(m, n, k, alpha, a, lda, b, ldb, c, ldc);
    return;
  }
  // Otherwise the vector kernel only handles A * B; transposed operands are packed.
  thread_local std::vector<float> pack_a;
  thread_local std::vector<float> pack_b;
  const float* pa = a;
  std::size_t plda = lda;
  if (trans_a == Trans::kYes) {
    pack_a.resize(m * k);
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t i = 0; i < m; ++i) pack_a[i * k + p] = a[p * lda + i];
    pa = pack_a.data();
    plda = k;
  }
  const float* pb = b;
  std::size_t pldb = ldb;
  if (trans_b == Trans::kYes) {
    pack_b.resize(k * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) pack_b[p * n + j] = b[j * ldb + p];
    pb = pack_b.data();
    pldb = n;
  }
  table().gemm_nn_acc(m, n, k, alpha, pa, plda, pb, pldb, c, ldc);
}

void axpy(std::size_t n, float alpha, const float* x, float* y) { table().axpy(n, alpha, x, y); }

void relu(std::size_t n, const float* x, float* y) { table().relu(n, x, y); }

void relu_backward(std::size_t n, const float* x, const float* dy, float* dx) {
  table().relu_backward(n, x, dy, dx);
}

void rmsprop_update(std::size_t n, float lr, float rho, float eps, const float* grad, float* accum,
                    float* value) {
  table().rmsprop_update(n, lr, rho, eps, grad, accum, value);
}

}  // namespace ssvae::simd
