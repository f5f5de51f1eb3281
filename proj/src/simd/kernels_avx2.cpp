// Built with -mavx2 -mfma. Keep this file free of standard-library
// templates and inline functions: the linker may otherwise pick these
// AVX2-encoded copies for callers running on CPUs without AVX2.

#include <immintrin.h>

#include "kernels_impl.hpp"

namespace ssvae::simd::detail {

namespace {

constexpr std::size_t kBlockK = 256;

inline __m256i tail_mask(std::size_t remaining) {
  return _mm256_cmpgt_epi32(_mm256_set1_epi32(static_cast<int>(remaining)),
                            _mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7));
}

// Every output element is produced by the same sequence of FMAs in k order
// whichever kernel width handles it, so results do not depend on the
// position of a row or column inside the matrix.
template <int R>
inline void block_16(std::size_t kc, const float* a, std::size_t lda, const float* b,
                     std::size_t ldb, float* c, std::size_t ldc, __m256 alpha) {
  __m256 acc0[R];
  __m256 acc1[R];
  for (int r = 0; r < R; ++r) {
    acc0[r] = _mm256_setzero_ps();
    acc1[r] = _mm256_setzero_ps();
  }
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b + p * ldb);
    const __m256 b1 = _mm256_loadu_ps(b + p * ldb + 8);
    for (int r = 0; r < R; ++r) {
      const __m256 av = _mm256_broadcast_ss(a + r * lda + p);
      acc0[r] = _mm256_fmadd_ps(av, b0, acc0[r]);
      acc1[r] = _mm256_fmadd_ps(av, b1, acc1[r]);
    }
  }
  for (int r = 0; r < R; ++r) {
    float* row = c + r * ldc;
    _mm256_storeu_ps(row, _mm256_fmadd_ps(alpha, acc0[r], _mm256_loadu_ps(row)));
    _mm256_storeu_ps(row + 8, _mm256_fmadd_ps(alpha, acc1[r], _mm256_loadu_ps(row + 8)));
  }
}

template <int R>
inline void block_8_masked(std::size_t kc, const float* a, std::size_t lda, const float* b,
                           std::size_t ldb, float* c, std::size_t ldc, __m256 alpha,
                           __m256i mask) {
  __m256 acc[R];
  for (int r = 0; r < R; ++r) acc[r] = _mm256_setzero_ps();
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_maskload_ps(b + p * ldb, mask);
    for (int r = 0; r < R; ++r) {
      acc[r] = _mm256_fmadd_ps(_mm256_broadcast_ss(a + r * lda + p), b0, acc[r]);
    }
  }
  for (int r = 0; r < R; ++r) {
    float* row = c + r * ldc;
    _mm256_maskstore_ps(row, mask, _mm256_fmadd_ps(alpha, acc[r], _mm256_maskload_ps(row, mask)));
  }
}

template <int R>
inline void row_panel(std::size_t n, std::size_t kc, const float* a, std::size_t lda,
                      const float* b, std::size_t ldb, float* c, std::size_t ldc, __m256 alpha) {
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) block_16<R>(kc, a, lda, b + j, ldb, c + j, ldc, alpha);
  for (; j < n; j += 8) {
    const std::size_t rem = n - j;
    const __m256i mask = tail_mask(rem < 8 ? rem : 8);
    block_8_masked<R>(kc, a, lda, b + j, ldb, c + j, ldc, alpha, mask);
  }
}

void gemm_nn_acc(std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
                 std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  const __m256 valpha = _mm256_set1_ps(alpha);
  for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
    const std::size_t kc = (k - p0) < kBlockK ? (k - p0) : kBlockK;
    const float* bp = b + p0 * ldb;
    // Column strips outermost so the kc x 16 panel of B stays in L1 across
    // all row blocks.
    for (std::size_t j0 = 0; j0 < n; j0 += 64) {
      const std::size_t nc = (n - j0) < 64 ? (n - j0) : 64;
      std::size_t i = 0;
      for (; i + 4 <= m; i += 4) {
        row_panel<4>(nc, kc, a + i * lda + p0, lda, bp + j0, ldb, c + i * ldc + j0, ldc, valpha);
      }
      for (; i < m; ++i) {
        row_panel<1>(nc, kc, a + i * lda + p0, lda, bp + j0, ldb, c + i * ldc + j0, ldc, valpha);
      }
    }
  }
}

inline float hsum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_movehdup_ps(s));
  return _mm_cvtss_f32(s);
}

// R rows of A dotted with C rows of B over kc elements; the k tail is masked
// so every element sees the same lane layout.
template <int R, int C>
inline void dot_block(std::size_t kc, const float* a, std::size_t lda, const float* b, std::size_t ldb,
                      float* c, std::size_t ldc, float alpha) {
  __m256 acc[R][C];
  for (int r = 0; r < R; ++r)
    for (int q = 0; q < C; ++q) acc[r][q] = _mm256_setzero_ps();
  std::size_t p = 0;
  for (; p + 8 <= kc; p += 8) {
    __m256 av[R];
    for (int r = 0; r < R; ++r) av[r] = _mm256_loadu_ps(a + r * lda + p);
    for (int q = 0; q < C; ++q) {
      const __m256 bv = _mm256_loadu_ps(b + q * ldb + p);
      for (int r = 0; r < R; ++r) acc[r][q] = _mm256_fmadd_ps(av[r], bv, acc[r][q]);
    }
  }
  if (p < kc) {
    const __m256i mask = tail_mask(kc - p);
    __m256 av[R];
    for (int r = 0; r < R; ++r) av[r] = _mm256_maskload_ps(a + r * lda + p, mask);
    for (int q = 0; q < C; ++q) {
      const __m256 bv = _mm256_maskload_ps(b + q * ldb + p, mask);
      for (int r = 0; r < R; ++r) acc[r][q] = _mm256_fmadd_ps(av[r], bv, acc[r][q]);
    }
  }
  for (int r = 0; r < R; ++r)
    for (int q = 0; q < C; ++q) c[r * ldc + q] += alpha * hsum(acc[r][q]);
}

constexpr std::size_t kDotBlockK = 512;

void gemm_nt_acc(std::size_t m, std::size_t n, std::size_t k, float alpha, const float* a,
                 std::size_t lda, const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  for (std::size_t p0 = 0; p0 < k; p0 += kDotBlockK) {
    const std::size_t kc = (k - p0) < kDotBlockK ? (k - p0) : kDotBlockK;
    std::size_t i = 0;
    for (; i + 2 <= m; i += 2) {
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) dot_block<2, 4>(kc, a + i * lda + p0, lda, b + j * ldb + p0, ldb, c + i * ldc + j, ldc, alpha);
      for (; j < n; ++j) dot_block<2, 1>(kc, a + i * lda + p0, lda, b + j * ldb + p0, ldb, c + i * ldc + j, ldc, alpha);
    }
    for (; i < m; ++i) {
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) dot_block<1, 4>(kc, a + i * lda + p0, lda, b + j * ldb + p0, ldb, c + i * ldc + j, ldc, alpha);
      for (; j < n; ++j) dot_block<1, 1>(kc, a + i * lda + p0, lda, b + j * ldb + p0, ldb, c + i * ldc + j, ldc, alpha);
    }
  }
}

void axpy(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void relu(std::size_t n, const float* x, float* y) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_backward(std::size_t n, const float* x, const float* dy, float* dx) {
  const __m256 zero = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
    const __m256 pass = _mm256_and_ps(mask, _mm256_loadu_ps(dy + i));
    _mm256_storeu_ps(dx + i, _mm256_add_ps(_mm256_loadu_ps(dx + i), pass));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0f) dx[i] += dy[i];
  }
}

void rmsprop_update(std::size_t n, float lr, float rho, float eps, const float* grad, float* accum,
                    float* value) {
  const __m256 vrho = _mm256_set1_ps(rho);
  const __m256 vomr = _mm256_set1_ps(1.0f - rho);
  const __m256 vlr = _mm256_set1_ps(lr);
  const __m256 veps = _mm256_set1_ps(eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 v = _mm256_add_ps(_mm256_mul_ps(vrho, _mm256_loadu_ps(accum + i)),
                                   _mm256_mul_ps(vomr, _mm256_mul_ps(g, g)));
    _mm256_storeu_ps(accum + i, v);
    const __m256 step = _mm256_div_ps(_mm256_mul_ps(vlr, g), _mm256_add_ps(_mm256_sqrt_ps(v), veps));
    _mm256_storeu_ps(value + i, _mm256_sub_ps(_mm256_loadu_ps(value + i), step));
  }
  for (; i < n; ++i) {
    const float g = grad[i];
    const float v = rho * accum[i] + (1.0f - rho) * (g * g);
    accum[i] = v;
    const __m128 sv = _mm_sqrt_ss(_mm_set_ss(v));
    value[i] -= lr * g / (_mm_cvtss_f32(sv) + eps);
  }
}

}  // namespace

const KernelTable* avx2_kernels() noexcept {
  static const KernelTable table{gemm_nn_acc, gemm_nt_acc, axpy, relu, relu_backward, rmsprop_update};
  return &table;
}

}  // namespace ssvae::simd::detail
