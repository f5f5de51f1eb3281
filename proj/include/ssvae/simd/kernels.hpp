#pragma once

// Data-parallel inner loops behind every layer. Each kernel has a scalar
// reference implementation and an AVX2+FMA variant; the variant is chosen at
// runtime from CPUID and can be pinned with SSVAE_SIMD=scalar|avx2 or
// set_active_level().

#include <cstddef>
#include <optional>
#include <string_view>

namespace ssvae::simd {

enum class Level { kScalar, kAvx2 };
enum class Trans { kNo, kYes };

/// Best level supported by both this build and the running CPU.
Level detect_level() noexcept;
Level active_level() noexcept;
/// Throws ConfigError if the level is unavailable on this machine.
void set_active_level(Level level);
bool level_available(Level level) noexcept;
const char* level_name(Level level) noexcept;
std::optional<Level> parse_level(std::string_view name) noexcept;

/// Row-major C = alpha * op(A) * op(B) + beta * C with op(A) m x k and
/// op(B) k x n. beta == 0 overwrites C without reading it.
void sgemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, float alpha,
           const float* a, std::size_t lda, const float* b, std::size_t ldb, float beta, float* c,
           std::size_t ldc);

/// y += alpha * x
void axpy(std::size_t n, float alpha, const float* x, float* y);
/// y = max(x, 0)
void relu(std::size_t n, const float* x, float* y);
/// dx += dy where x > 0
void relu_backward(std::size_t n, const float* x, const float* dy, float* dx);
/// v = rho*v + (1-rho)*g^2;  w -= lr * g / (sqrt(v) + eps)
void rmsprop_update(std::size_t n, float lr, float rho, float eps, const float* grad, float* accum,
                    float* value);

/// RAII override of the active level, restoring the previous one on exit.
class ScopedLevel {
 public:
  explicit ScopedLevel(Level level) : previous_(active_level()) { set_active_level(level); }
  ~ScopedLevel() { set_active_level(previous_); }
  ScopedLevel(const ScopedLevel&) = delete;
  ScopedLevel& operator=(const ScopedLevel&) = delete;

 private:
  Level previous_;
};

}  // namespace ssvae::simd
