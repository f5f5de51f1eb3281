#pragma once

// Independent reference computations used as test oracles. Everything here
// is written in plain double-precision loops and shares no code with the
// library kernels it is compared against.

#include <cstdint>
#include <vector>

namespace oracle {

/// C[m,n] = A[m,k] B[k,n], all row-major.
std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                           std::size_t k, std::size_t n);

/// Direct sliding dot product; x[B,C,L], w[F,C,K] -> [B,F,L_out].
std::vector<double> conv1d(const std::vector<double>& x, const std::vector<double>& w, std::size_t batch,
                           std::size_t channels, std::size_t length, std::size_t filters, std::size_t kernel,
                           std::size_t stride, std::size_t padding);

/// Scatter form; x[B,C,L], w[C,F,K] -> [B,F,(L-1)*stride+K].
std::vector<double> transpose_conv1d(const std::vector<double>& x, const std::vector<double>& w,
                                     std::size_t batch, std::size_t channels, std::size_t length,
                                     std::size_t filters, std::size_t kernel, std::size_t stride);

/// Cyclic Jacobi eigen-decomposition of a symmetric n x n matrix. Returns
/// eigenvalues sorted descending; vectors[j*n + i] is component i of vector j.
void jacobi_eigen(std::vector<double> a, std::size_t n, std::vector<double>& values,
                  std::vector<double>& vectors);

/// Reference xoshiro256** seeded by splitmix64, straight from the published
/// algorithm description.
class Xoshiro {
 public:
  explicit Xoshiro(std::uint64_t seed);
  std::uint64_t next();

 private:
  std::uint64_t s[4];
};

/// Mean and standard error of a sample.
struct Moments {
  double mean;
  double stderr_;
};
Moments moments(const std::vector<double>& v);

}  // namespace oracle
