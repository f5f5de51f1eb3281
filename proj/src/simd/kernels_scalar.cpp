#include <cmath>

#include "kernels_impl.hpp"

namespace ssvae::simd::detail {

namespace {

void gemm_nn_acc(std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
                 std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  scalar_sgemm(false, false, m, n, k, alpha, a, lda, b, ldb, 1.0f, c, ldc);
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void relu(std::size_t n, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(std::size_t n, const float* x, const float* dy, float* dx) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0f) dx[i] += dy[i];
  }
}

void rmsprop_update(std::size_t n, float lr, float rho, float eps, const float* grad, float* accum,
                    float* value) {
  const float one_minus_rho = 1.0f - rho;
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i];
    const float v = rho * accum[i] + one_minus_rho * (g * g);
    accum[i] = v;
    value[i] -= lr * g / (std::sqrt(v) + eps);
  }
}

}  // namespace

void scalar_sgemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                  float alpha, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                  float beta, float* c, std::size_t ldc) noexcept {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (std::size_t p = 0; p < k; ++p) {
        const float av = trans_a ? a[p * lda + i] : a[i * lda + p];
        const float bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
        acc += av * bv;
      }
      float& out = c[i * ldc + j];
      out = beta == 0.0f ? alpha * acc : alpha * acc + beta * out;
    }
  }
}

const KernelTable& scalar_kernels() noexcept {
  static const KernelTable table{gemm_nn_acc, nullptr, axpy, relu, relu_backward, rmsprop_update};
  return table;
}

}  // namespace ssvae::simd::detail
