#pragma once

// Differentiable tensor operations. Shapes in comments use B = batch,
// C/F = channels, L = length, K = kernel width or class count.

#include <cstdint>
#include <span>

#include "ssvae/nn/autograd.hpp"
#include "ssvae/rng.hpp"

namespace ssvae::nn {

/// Output length of a cross-correlation; throws ConfigError when the kernel
/// does not fit in the padded input.
std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t padding);
std::size_t transpose_conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride);

/// x[B,I] * W[I,O] + bias[O] -> [B,O]
Var dense(const Var& x, const Var& weights, const Var& bias);

/// Cross-correlation x[B,C,L] with kernels[F,C,K] -> [B,F,L_out].
Var conv1d(const Var& x, const Var& kernels, std::size_t stride, std::size_t padding);

/// Adjoint of conv1d: x[B,C,L] with kernels[C,F,K] -> [B,F,(L-1)*stride+K].
Var transpose_conv1d(const Var& x, const Var& kernels, std::size_t stride);

/// Adds bias[C] to every position of x[B,C,L] (or x[B,C]).
Var add_channel_bias(const Var& x, const Var& bias);

struct BatchNormState {
  Tensor* running_mean;
  Tensor* running_var;
  float momentum = 0.9f;  // running = momentum * running + (1 - momentum) * batch
  float eps = 1e-5f;
};

/// Per-channel normalization of x[B,C,L] or x[B,C]. Training mode uses batch
/// statistics (accumulated in double) and updates the running estimates;
/// evaluation mode uses the running estimates.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState state, bool training);

/// While alive, digests the piecewise-linear decisions (relu masks, max-pool
/// winners, clamp saturation) of every op evaluated on this thread. Equal
/// digests for two evaluations mean they lie on the same smooth piece.
class PatternCapture {
 public:
  PatternCapture();
  ~PatternCapture();
  PatternCapture(const PatternCapture&) = delete;
  PatternCapture& operator=(const PatternCapture&) = delete;
  std::uint64_t digest() const { return digest_; }

 private:
  std::uint64_t digest_ = 0;
  std::uint64_t* previous_;
};

Var relu(const Var& x);

/// Non-overlapping max pool along the last axis of x[B,C,L]; ties resolve to
/// the lowest index. Output length floor(L / width).
Var max_pool1d(const Var& x, std::size_t width);

/// Inverted dropout: in training mode zeroes entries with probability `rate`
/// and scales survivors by 1/(1-rate). Identity otherwise.
Var dropout(const Var& x, float rate, RngStream& rng, bool training);

/// Row-wise softmax / log-softmax of [B,K], max-subtracted.
Var softmax(const Var& logits);
Var log_softmax(const Var& logits);

Var reshape(const Var& x, Shape shape);
/// Columns [begin, end) of x[B,D].
Var slice_cols(const Var& x, std::size_t begin, std::size_t end);
/// [B,P] ++ [B,Q] -> [B,P+Q]
Var concat_cols(const Var& a, const Var& b);
/// x[B,D] -> [times*B, D]; row t*B + b is x[b].
Var tile_rows(const Var& x, std::size_t times);
/// v[B] -> [B,K], every column a copy of v.
Var broadcast_cols(const Var& v, std::size_t k);
Var transpose2d(const Var& x);

/// Elementwise clamp; gradient passes only strictly inside (lo, hi).
Var clamp(const Var& x, float lo, float hi);
Var exp(const Var& x);
Var log(const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, float factor);

/// Row sums of [B,D] -> [B] (64-bit accumulation).
Var sum_rows(const Var& x);
/// Sum / mean of all entries -> [1] (64-bit accumulation).
Var sum_all(const Var& x);
Var mean_all(const Var& x);
/// out[b] = x[b, labels[b]] for x[B,K].
Var pick(const Var& x, std::span<const int> labels);

}  // namespace ssvae::nn
