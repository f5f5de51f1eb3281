#pragma once

// Internal per-level kernel entry points. The AVX2 translation unit is built
// with -mavx2 -mfma and must not instantiate any inline standard-library
// code, so it only sees the plain C signatures below.

#include <cstddef>

namespace ssvae::simd::detail {

struct KernelTable {
  /// C += alpha * A * B, no transposes.
  void (*gemm_nn_acc)(std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
                      std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc);
  /// C += alpha * A * B^T by row dot products (B given as n x k rows).
  /// nullptr for levels that only provide gemm_nn_acc.
  void (*gemm_nt_acc)(std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
                      std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc);
  void (*axpy)(std::size_t n, float alpha, const float* x, float* y);
  void (*relu)(std::size_t n, const float* x, float* y);
  void (*relu_backward)(std::size_t n, const float* x, const float* dy, float* dx);
  void (*rmsprop_update)(std::size_t n, float lr, float rho, float eps, const float* grad,
                         float* accum, float* value);
};

const KernelTable& scalar_kernels() noexcept;
/// nullptr when the build has no AVX2 translation unit.
const KernelTable* avx2_kernels() noexcept;

/// Reference GEMM that indexes transposed operands directly.
void scalar_sgemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                  float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                  float beta, float* c, std::size_t ldc) noexcept;

}  // namespace ssvae::simd::detail
