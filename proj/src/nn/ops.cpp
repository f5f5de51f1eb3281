#include "ssvae/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ssvae/error.hpp"
#include "ssvae/simd/kernels.hpp"

namespace ssvae::nn {

using simd::Trans;

namespace {

thread_local std::uint64_t* g_pattern = nullptr;

void mix_pattern(std::uint64_t v) {
  std::uint64_t& h = *g_pattern;
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
}

/// Gradient buffer of input i, or nullptr if that input takes no gradient.
Tensor* input_grad(Node& node, std::size_t i) {
  Node& in = *node.inputs[i];
  return in.requires_grad ? &in.grad_buffer() : nullptr;
}

const Tensor& input_value(const Node& node, std::size_t i) { return node.inputs[i]->value; }

void expect_rank(const Var& x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank) {
    throw ConfigError(std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
                      shape_str(x.shape()));
  }
}

void expect_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                      shape_str(b.shape()));
  }
}

// cols[c*K + k][b*L_out + t] = x[b][c][t*stride + k - padding] (zero outside).
void im2col(const float* x, std::size_t batch, std::size_t channels, std::size_t length,
            std::size_t kernel, std::size_t stride, std::size_t padding, std::size_t out_len,
            float* cols) {
  const std::size_t ncols = batch * out_len;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < kernel; ++k) {
      float* row = cols + (c * kernel + k) * ncols;
      for (std::size_t b = 0; b < batch; ++b) {
        const float* src = x + (b * channels + c) * length;
        float* dst = row + b * out_len;
        for (std::size_t t = 0; t < out_len; ++t) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + k) -
                                     static_cast<std::ptrdiff_t>(padding);
          dst[t] = (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) ? src[pos] : 0.0f;
        }
      }
    }
  }
}

// Row-major transpose of im2col for one sample: cols_t[t][c*K + k].
void im2col_t(const float* x, std::size_t channels, std::size_t length, std::size_t kernel, std::size_t stride,
              std::size_t padding, std::size_t out_len, float* cols_t) {
  const std::size_t ck = channels * kernel;
  for (std::size_t t = 0; t < out_len; ++t) {
    float* row = cols_t + t * ck;
    for (std::size_t c = 0; c < channels; ++c) {
      const float* src = x + c * length;
      for (std::size_t k = 0; k < kernel; ++k) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + k) - static_cast<std::ptrdiff_t>(padding);
        row[c * kernel + k] = (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) ? src[pos] : 0.0f;
      }
    }
  }
}

// Adjoint of im2col: scatter-adds cols back into x.
void col2im_add(const float* cols, std::size_t batch, std::size_t channels, std::size_t length,
                std::size_t kernel, std::size_t stride, std::size_t padding, std::size_t out_len,
                float* x) {
  const std::size_t ncols = batch * out_len;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t k = 0; k < kernel; ++k) {
      const float* row = cols + (c * kernel + k) * ncols;
      for (std::size_t b = 0; b < batch; ++b) {
        float* dst = x + (b * channels + c) * length;
        const float* src = row + b * out_len;
        for (std::size_t t = 0; t < out_len; ++t) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + k) -
                                     static_cast<std::ptrdiff_t>(padding);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(length)) dst[pos] += src[t];
        }
      }
    }
  }
}

// out[j][i] = in[i][j] for in [rows, cols].
Tensor transposed(const Tensor& in, std::size_t rows, std::size_t cols) {
  Tensor out = Tensor::uninitialized({cols, rows});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
  return out;
}

}  // namespace

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t padding) {
  if (stride == 0) throw ConfigError("conv1d: stride must be >= 1");
  if (kernel == 0 || kernel > length + 2 * padding) {
    throw ConfigError("conv1d: kernel " + std::to_string(kernel) + " larger than padded input " +
                      std::to_string(length + 2 * padding));
  }
  return (length + 2 * padding - kernel) / stride + 1;
}

std::size_t transpose_conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride) {
  if (stride == 0) throw ConfigError("transpose_conv1d: stride must be >= 1");
  if (kernel == 0) throw ConfigError("transpose_conv1d: kernel must be >= 1");
  return (length - 1) * stride + kernel;
}

Var dense(const Var& x, const Var& weights, const Var& bias) {
  expect_rank(x, 2, "dense");
  expect_rank(weights, 2, "dense");
  const std::size_t batch = x.dim(0), in = x.dim(1), out = weights.dim(1);
  if (weights.dim(0) != in || bias.value().size() != out) {
    throw ConfigError("dense: cannot apply weights " + shape_str(weights.shape()) + " and bias " +
                      shape_str(bias.shape()) + " to input " + shape_str(x.shape()));
  }
  Tensor y({batch, out});
  for (std::size_t b = 0; b < batch; ++b) std::copy_n(bias.value().data(), out, y.data() + b * out);
  simd::sgemm(Trans::kNo, Trans::kNo, batch, out, in, 1.0f, x.value().data(), in,
              weights.value().data(), out, 1.0f, y.data(), out);
  return make_op(std::move(y), {x, weights, bias}, [batch, in, out](Node& n) {
    const float* dy = n.grad.data();
    if (Tensor* dx = input_grad(n, 0)) {
      simd::sgemm(Trans::kNo, Trans::kYes, batch, in, out, 1.0f, dy, out, input_value(n, 1).data(),
                  out, 1.0f, dx->data(), in);
    }
    if (Tensor* dw = input_grad(n, 1)) {
      simd::sgemm(Trans::kYes, Trans::kNo, in, out, batch, 1.0f, input_value(n, 0).data(), in, dy,
                  out, 1.0f, dw->data(), out);
    }
    if (Tensor* db = input_grad(n, 2)) {
      for (std::size_t o = 0; o < out; ++o) {
        double s = 0.0;
        for (std::size_t b = 0; b < batch; ++b) s += dy[b * out + o];
        (*db)[o] += static_cast<float>(s);
      }
    }
  });
}

// Both convolutions run one sample at a time: x[b] is already a [C, L]
// matrix, so the per-sample im2col buffer stays in cache and no layout
// conversion is needed.
Var conv1d(const Var& x, const Var& kernels, std::size_t stride, std::size_t padding) {
  expect_rank(x, 3, "conv1d");
  expect_rank(kernels, 3, "conv1d");
  const std::size_t batch = x.dim(0), channels = x.dim(1), length = x.dim(2);
  const std::size_t filters = kernels.dim(0), kernel = kernels.dim(2);
  if (kernels.dim(1) != channels) {
    throw ConfigError("conv1d: kernels " + shape_str(kernels.shape()) + " do not match input " +
                      shape_str(x.shape()));
  }
  const std::size_t out_len = conv1d_output_length(length, kernel, stride, padding);
  const std::size_t ck = channels * kernel, in_step = channels * length, out_step = filters * out_len;

  Tensor y = Tensor::uninitialized({batch, filters, out_len});
  std::vector<float> cols(ck * out_len);
  const float* xv = x.value().data();
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(xv + b * in_step, 1, channels, length, kernel, stride, padding, out_len, cols.data());
    simd::sgemm(Trans::kNo, Trans::kNo, filters, out_len, ck, 1.0f, kernels.value().data(), ck, cols.data(),
                out_len, 0.0f, y.data() + b * out_step, out_len);
  }

  return make_op(std::move(y), {x, kernels}, [=](Node& n) {
    const float* xv = input_value(n, 0).data();
    Tensor* dw = input_grad(n, 1);
    Tensor* dx = input_grad(n, 0);
    const Tensor wt = dx ? transposed(input_value(n, 1), filters, ck) : Tensor();
    std::vector<float> cols(ck * out_len), dcols(dx ? ck * out_len : 0);
    for (std::size_t b = 0; b < batch; ++b) {
      const float* dy = n.grad.data() + b * out_step;
      if (dw) {
        im2col_t(xv + b * in_step, channels, length, kernel, stride, padding, out_len, cols.data());
        simd::sgemm(Trans::kNo, Trans::kNo, filters, ck, out_len, 1.0f, dy, out_len, cols.data(), ck, 1.0f,
                    dw->data(), ck);
      }
      if (dx) {
        simd::sgemm(Trans::kNo, Trans::kNo, ck, out_len, filters, 1.0f, wt.data(), filters, dy, out_len, 0.0f,
                    dcols.data(), out_len);
        col2im_add(dcols.data(), 1, channels, length, kernel, stride, padding, out_len, dx->data() + b * in_step);
      }
    }
  });
}

Var transpose_conv1d(const Var& x, const Var& kernels, std::size_t stride) {
  expect_rank(x, 3, "transpose_conv1d");
  expect_rank(kernels, 3, "transpose_conv1d");
  const std::size_t batch = x.dim(0), channels = x.dim(1), length = x.dim(2);
  const std::size_t filters = kernels.dim(1), kernel = kernels.dim(2);
  if (kernels.dim(0) != channels) {
    throw ConfigError("transpose_conv1d: kernels " + shape_str(kernels.shape()) +
                      " do not match input " + shape_str(x.shape()));
  }
  const std::size_t out_len = transpose_conv1d_output_length(length, kernel, stride);
  const std::size_t fk = filters * kernel, in_step = channels * length, out_step = filters * out_len;

  const Tensor wt = transposed(kernels.value(), channels, fk);
  Tensor y({batch, filters, out_len});
  std::vector<float> cols(fk * length);
  const float* xv = x.value().data();
  for (std::size_t b = 0; b < batch; ++b) {
    simd::sgemm(Trans::kNo, Trans::kNo, fk, length, channels, 1.0f, wt.data(), channels, xv + b * in_step, length,
                0.0f, cols.data(), length);
    col2im_add(cols.data(), 1, filters, out_len, kernel, stride, 0, length, y.data() + b * out_step);
  }

  return make_op(std::move(y), {x, kernels}, [=](Node& n) {
    const float* xv = input_value(n, 0).data();
    const float* w = input_value(n, 1).data();
    Tensor* dw = input_grad(n, 1);
    Tensor* dx = input_grad(n, 0);
    std::vector<float> dcols(fk * length);
    for (std::size_t b = 0; b < batch; ++b) {
      const float* dy = n.grad.data() + b * out_step;
      if (dw) {
        im2col_t(dy, filters, out_len, kernel, stride, 0, length, dcols.data());
        simd::sgemm(Trans::kNo, Trans::kNo, channels, fk, length, 1.0f, xv + b * in_step, length, dcols.data(), fk,
                    1.0f, dw->data(), fk);
      }
      if (dx) {
        im2col(dy, 1, filters, out_len, kernel, stride, 0, length, dcols.data());
        simd::sgemm(Trans::kNo, Trans::kNo, channels, length, fk, 1.0f, w, fk, dcols.data(), length, 1.0f,
                    dx->data() + b * in_step, length);
      }
    }
  });
}

Var add_channel_bias(const Var& x, const Var& bias) {
  if (x.value().rank() < 2 || x.value().rank() > 3 || bias.value().size() != x.dim(1)) {
    throw ConfigError("add_channel_bias: bias " + shape_str(bias.shape()) + " does not match input " +
                      shape_str(x.shape()));
  }
  const std::size_t batch = x.dim(0), channels = x.dim(1);
  const std::size_t length = x.value().rank() == 3 ? x.dim(2) : 1;
  Tensor y = x.value();
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      float* row = y.data() + (b * channels + c) * length;
      const float v = bias.value()[c];
      for (std::size_t t = 0; t < length; ++t) row[t] += v;
    }
  return make_op(std::move(y), {x, bias}, [batch, channels, length](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) simd::axpy(dx->size(), 1.0f, n.grad.data(), dx->data());
    if (Tensor* db = input_grad(n, 1)) {
      for (std::size_t c = 0; c < channels; ++c) {
        double s = 0.0;
        for (std::size_t b = 0; b < batch; ++b) {
          const float* row = n.grad.data() + (b * channels + c) * length;
          for (std::size_t t = 0; t < length; ++t) s += row[t];
        }
        (*db)[c] += static_cast<float>(s);
      }
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState state, bool training) {
  if (x.value().rank() < 2 || x.value().rank() > 3) throw ConfigError("batch_norm: expected [B,C] or [B,C,L]");
  const std::size_t batch = x.dim(0), channels = x.dim(1);
  const std::size_t length = x.value().rank() == 3 ? x.dim(2) : 1;
  if (gamma.value().size() != channels || beta.value().size() != channels ||
      state.running_mean->size() != channels || state.running_var->size() != channels) {
    throw ConfigError("batch_norm: parameter size does not match channel count " + std::to_string(channels));
  }
  const std::size_t count = batch * length;
  if (training && count < 2) throw ConfigError("batch_norm: training mode needs at least 2 values per channel");

  const float* xv = x.value().data();
  std::vector<float> inv_std(channels);
  Tensor xhat = Tensor::zeros_like(x.value());
  for (std::size_t c = 0; c < channels; ++c) {
    double mean, var;
    if (training) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const float* row = xv + (b * channels + c) * length;
        for (std::size_t t = 0; t < length; ++t) s += row[t];
      }
      mean = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const float* row = xv + (b * channels + c) * length;
        for (std::size_t t = 0; t < length; ++t) {
          const double d = row[t] - mean;
          ss += d * d;
        }
      }
      var = ss / static_cast<double>(count);
      const double m = state.momentum;
      const double unbiased = ss / static_cast<double>(count - 1);
      (*state.running_mean)[c] = static_cast<float>(m * (*state.running_mean)[c] + (1.0 - m) * mean);
      (*state.running_var)[c] = static_cast<float>(m * (*state.running_var)[c] + (1.0 - m) * unbiased);
    } else {
      mean = (*state.running_mean)[c];
      var = (*state.running_var)[c];
    }
    const double istd = 1.0 / std::sqrt(var + state.eps);
    inv_std[c] = static_cast<float>(istd);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + c) * length;
      for (std::size_t t = 0; t < length; ++t) {
        xhat[off + t] = static_cast<float>((xv[off + t] - mean) * istd);
      }
    }
  }
  Tensor y = Tensor::zeros_like(x.value());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t off = (b * channels + c) * length;
      const float g = gamma.value()[c], be = beta.value()[c];
      for (std::size_t t = 0; t < length; ++t) y[off + t] = g * xhat[off + t] + be;
    }

  return make_op(std::move(y), {x, gamma, beta},
                 [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
                   const float* dy = n.grad.data();
                   const Tensor& g = input_value(n, 1);
                   Tensor* dx = input_grad(n, 0);
                   Tensor* dg = input_grad(n, 1);
                   Tensor* db = input_grad(n, 2);
                   for (std::size_t c = 0; c < channels; ++c) {
                     double sum_dy = 0.0, sum_dy_xhat = 0.0;
                     for (std::size_t b = 0; b < batch; ++b) {
                       const std::size_t off = (b * channels + c) * length;
                       for (std::size_t t = 0; t < length; ++t) {
                         sum_dy += dy[off + t];
                         sum_dy_xhat += static_cast<double>(dy[off + t]) * xhat[off + t];
                       }
                     }
                     if (dg) (*dg)[c] += static_cast<float>(sum_dy_xhat);
                     if (db) (*db)[c] += static_cast<float>(sum_dy);
                     if (!dx) continue;
                     const double scale_c = static_cast<double>(g[c]) * inv_std[c];
                     const double inv_count = 1.0 / static_cast<double>(count);
                     for (std::size_t b = 0; b < batch; ++b) {
                       const std::size_t off = (b * channels + c) * length;
                       for (std::size_t t = 0; t < length; ++t) {
                         double v;
                         if (training) {
                           v = scale_c * (dy[off + t] - sum_dy * inv_count -
                                          xhat[off + t] * sum_dy_xhat * inv_count);
                         } else {
                           v = scale_c * dy[off + t];
                         }
                         (*dx)[off + t] += static_cast<float>(v);
                       }
                     }
                   }
                 });
}

PatternCapture::PatternCapture() : previous_(g_pattern) { g_pattern = &digest_; }
PatternCapture::~PatternCapture() { g_pattern = previous_; }

Var relu(const Var& x) {
  Tensor y = Tensor::uninitialized(x.shape());
  simd::relu(y.size(), x.value().data(), y.data());
  if (g_pattern) {
    const float* xv = x.value().data();
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      word = (word << 1) | (xv[i] > 0.0f ? 1u : 0u);
      if (i % 64 == 63) mix_pattern(word), word = 0;
    }
    mix_pattern(word);
  }
  return make_op(std::move(y), {x}, [](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      simd::relu_backward(dx->size(), input_value(n, 0).data(), n.grad.data(), dx->data());
    }
  });
}

Var max_pool1d(const Var& x, std::size_t width) {
  expect_rank(x, 3, "max_pool1d");
  if (width == 0 || width > x.dim(2)) throw ConfigError("max_pool1d: invalid width " + std::to_string(width));
  const std::size_t rows = x.dim(0) * x.dim(1), length = x.dim(2), out_len = length / width;
  Tensor y({x.dim(0), x.dim(1), out_len});
  std::vector<std::uint32_t> argmax(rows * out_len);
  const float* xv = x.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const std::size_t base = r * length + t * width;
      std::size_t best = base;
      for (std::size_t w = 1; w < width; ++w) {
        if (xv[base + w] > xv[best]) best = base + w;
      }
      y[r * out_len + t] = xv[best];
      argmax[r * out_len + t] = static_cast<std::uint32_t>(best);
    }
  }
  if (g_pattern) {
    for (std::uint32_t a : argmax) mix_pattern(a);
  }
  return make_op(std::move(y), {x}, [argmax = std::move(argmax)](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      for (std::size_t i = 0; i < argmax.size(); ++i) (*dx)[argmax[i]] += n.grad[i];
    }
  });
}

Var dropout(const Var& x, float rate, RngStream& rng, bool training) {
  if (rate < 0.0f || rate >= 1.0f) throw ConfigError("dropout: rate must be in [0, 1)");
  if (!training || rate == 0.0f) return x;
  const float keep = 1.0f - rate;
  const float inv_keep = 1.0f / keep;
  Tensor mask = Tensor::zeros_like(x.value());
  for (float& m : mask.values()) m = rng.uniform_float() < keep ? inv_keep : 0.0f;
  Tensor y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return make_op(std::move(y), {x}, [mask = std::move(mask)](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      for (std::size_t i = 0; i < mask.size(); ++i) (*dx)[i] += n.grad[i] * mask[i];
    }
  });
}

Var softmax(const Var& logits) {
  expect_rank(logits, 2, "softmax");
  const std::size_t rows = logits.dim(0), k = logits.dim(1);
  Tensor y = Tensor::zeros_like(logits.value());
  const float* xv = logits.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = xv + r * k;
    const float mx = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(static_cast<double>(row[j]) - mx);
    for (std::size_t j = 0; j < k; ++j) {
      y[r * k + j] = static_cast<float>(std::exp(static_cast<double>(row[j]) - mx) / s);
    }
  }
  Tensor probs = y;
  return make_op(std::move(y), {logits}, [rows, k, probs = std::move(probs)](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j) dot += static_cast<double>(n.grad[r * k + j]) * probs[r * k + j];
        for (std::size_t j = 0; j < k; ++j) {
          (*dx)[r * k + j] += static_cast<float>(probs[r * k + j] * (n.grad[r * k + j] - dot));
        }
      }
    }
  });
}

Var log_softmax(const Var& logits) {
  expect_rank(logits, 2, "log_softmax");
  const std::size_t rows = logits.dim(0), k = logits.dim(1);
  Tensor y = Tensor::zeros_like(logits.value());
  Tensor probs = Tensor::zeros_like(logits.value());
  const float* xv = logits.value().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const float* row = xv + r * k;
    const double mx = *std::max_element(row, row + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < k; ++j) {
      y[r * k + j] = static_cast<float>(row[j] - lse);
      probs[r * k + j] = static_cast<float>(std::exp(row[j] - lse));
    }
  }
  return make_op(std::move(y), {logits}, [rows, k, probs = std::move(probs)](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += n.grad[r * k + j];
        for (std::size_t j = 0; j < k; ++j) {
          (*dx)[r * k + j] += static_cast<float>(n.grad[r * k + j] - probs[r * k + j] * s);
        }
      }
    }
  });
}

Var reshape(const Var& x, Shape shape) {
  Tensor y = x.value().reshaped(std::move(shape));
  return make_op(std::move(y), {x}, [](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) simd::axpy(dx->size(), 1.0f, n.grad.data(), dx->data());
  });
}

Var slice_cols(const Var& x, std::size_t begin, std::size_t end) {
  expect_rank(x, 2, "slice_cols");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  if (begin >= end || end > d) throw ConfigError("slice_cols: range out of bounds");
  const std::size_t w = end - begin;
  Tensor y({rows, w});
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.value().data() + r * d + begin, w, y.data() + r * w);
  return make_op(std::move(y), {x}, [rows, d, begin, w](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < w; ++j) (*dx)[r * d + begin + j] += n.grad[r * w + j];
    }
  });
}

Var concat_cols(const Var& a, const Var& b) {
  expect_rank(a, 2, "concat_cols");
  expect_rank(b, 2, "concat_cols");
  if (a.dim(0) != b.dim(0)) throw ConfigError("concat_cols: row counts differ");
  const std::size_t rows = a.dim(0), p = a.dim(1), q = b.dim(1);
  Tensor y({rows, p + q});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().data() + r * p, p, y.data() + r * (p + q));
    std::copy_n(b.value().data() + r * q, q, y.data() + r * (p + q) + p);
  }
  return make_op(std::move(y), {a, b}, [rows, p, q](Node& n) {
    if (Tensor* da = input_grad(n, 0)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < p; ++j) (*da)[r * p + j] += n.grad[r * (p + q) + j];
    }
    if (Tensor* db = input_grad(n, 1)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < q; ++j) (*db)[r * q + j] += n.grad[r * (p + q) + p + j];
    }
  });
}

Var tile_rows(const Var& x, std::size_t times) {
  expect_rank(x, 2, "tile_rows");
  if (times == 0) throw ConfigError("tile_rows: times must be >= 1");
  const std::size_t block = x.value().size();
  Tensor y({times * x.dim(0), x.dim(1)});
  for (std::size_t t = 0; t < times; ++t) std::copy_n(x.value().data(), block, y.data() + t * block);
  return make_op(std::move(y), {x}, [times, block](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      for (std::size_t t = 0; t < times; ++t) simd::axpy(block, 1.0f, n.grad.data() + t * block, dx->data());
    }
  });
}

Var broadcast_cols(const Var& v, std::size_t k) {
  expect_rank(v, 1, "broadcast_cols");
  const std::size_t rows = v.dim(0);
  Tensor y({rows, k});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < k; ++j) y[r * k + j] = v.value()[r];
  return make_op(std::move(y), {v}, [rows, k](Node& n) {
    if (Tensor* dv = input_grad(n, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += n.grad[r * k + j];
        (*dv)[r] += static_cast<float>(s);
      }
    }
  });
}

Var transpose2d(const Var& x) {
  expect_rank(x, 2, "transpose2d");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  Tensor y({cols, rows});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[c * rows + r] = x.value()[r * cols + c];
  return make_op(std::move(y), {x}, [rows, cols](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*dx)[r * cols + c] += n.grad[c * rows + r];
    }
  });
}

Var clamp(const Var& x, float lo, float hi) {
  Tensor y = x.value();
  for (float& v : y.values()) v = std::clamp(v, lo, hi);
  if (g_pattern) {
    for (float v : x.value().values()) mix_pattern(v <= lo ? 1 : (v >= hi ? 2 : 0));
  }
  return make_op(std::move(y), {x}, [lo, hi](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      const Tensor& xv = input_value(n, 0);
      for (std::size_t i = 0; i < xv.size(); ++i) {
        if (xv[i] > lo && xv[i] < hi) (*dx)[i] += n.grad[i];
      }
    }
  });
}

Var exp(const Var& x) {
  Tensor y = x.value();
  for (float& v : y.values()) v = std::exp(v);
  Tensor out = y;
  return make_op(std::move(y), {x}, [out = std::move(out)](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      for (std::size_t i = 0; i < out.size(); ++i) (*dx)[i] += n.grad[i] * out[i];
    }
  });
}

Var log(const Var& x) {
  Tensor y = x.value();
  for (float& v : y.values()) v = std::log(v);
  return make_op(std::move(y), {x}, [](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      const Tensor& xv = input_value(n, 0);
      for (std::size_t i = 0; i < xv.size(); ++i) (*dx)[i] += n.grad[i] / xv[i];
    }
  });
}

Var add(const Var& a, const Var& b) {
  expect_same_shape(a, b, "add");
  Tensor y = a.value();
  simd::axpy(y.size(), 1.0f, b.value().data(), y.data());
  return make_op(std::move(y), {a, b}, [](Node& n) {
    for (std::size_t i = 0; i < 2; ++i) {
      if (Tensor* d = input_grad(n, i)) simd::axpy(d->size(), 1.0f, n.grad.data(), d->data());
    }
  });
}

Var sub(const Var& a, const Var& b) {
  expect_same_shape(a, b, "sub");
  Tensor y = a.value();
  simd::axpy(y.size(), -1.0f, b.value().data(), y.data());
  return make_op(std::move(y), {a, b}, [](Node& n) {
    if (Tensor* d = input_grad(n, 0)) simd::axpy(d->size(), 1.0f, n.grad.data(), d->data());
    if (Tensor* d = input_grad(n, 1)) simd::axpy(d->size(), -1.0f, n.grad.data(), d->data());
  });
}

Var mul(const Var& a, const Var& b) {
  expect_same_shape(a, b, "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return make_op(std::move(y), {a, b}, [](Node& n) {
    const Tensor& av = input_value(n, 0);
    const Tensor& bv = input_value(n, 1);
    if (Tensor* d = input_grad(n, 0)) {
      for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += n.grad[i] * bv[i];
    }
    if (Tensor* d = input_grad(n, 1)) {
      for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += n.grad[i] * av[i];
    }
  });
}

Var scale(const Var& x, float factor) {
  Tensor y = x.value();
  for (float& v : y.values()) v *= factor;
  return make_op(std::move(y), {x}, [factor](Node& n) {
    if (Tensor* d = input_grad(n, 0)) simd::axpy(d->size(), factor, n.grad.data(), d->data());
  });
}

Var sum_rows(const Var& x) {
  expect_rank(x, 2, "sum_rows");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  Tensor y({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += x.value()[r * d + j];
    y[r] = static_cast<float>(s);
  }
  return make_op(std::move(y), {x}, [rows, d](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < d; ++j) (*dx)[r * d + j] += n.grad[r];
    }
  });
}

Var sum_all(const Var& x) {
  double s = 0.0;
  for (float v : x.value().values()) s += v;
  return make_op(Tensor({1}, static_cast<float>(s)), {x}, [](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      const float g = n.grad[0];
      for (float& v : dx->values()) v += g;
    }
  });
}

Var mean_all(const Var& x) {
  const double count = static_cast<double>(x.value().size());
  double s = 0.0;
  for (float v : x.value().values()) s += v;
  return make_op(Tensor({1}, static_cast<float>(s / count)), {x}, [count](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      const float g = static_cast<float>(n.grad[0] / count);
      for (float& v : dx->values()) v += g;
    }
  });
}

Var pick(const Var& x, std::span<const int> labels) {
  expect_rank(x, 2, "pick");
  const std::size_t rows = x.dim(0), k = x.dim(1);
  if (labels.size() != rows) throw ConfigError("pick: label count does not match rows");
  std::vector<int> idx(labels.begin(), labels.end());
  Tensor y({rows});
  for (std::size_t r = 0; r < rows; ++r) {
    if (idx[r] < 0 || static_cast<std::size_t>(idx[r]) >= k) {
      throw ConfigError("pick: label " + std::to_string(idx[r]) + " out of range");
    }
    y[r] = x.value()[r * k + static_cast<std::size_t>(idx[r])];
  }
  return make_op(std::move(y), {x}, [k, idx = std::move(idx)](Node& n) {
    if (Tensor* dx = input_grad(n, 0)) {
      for (std::size_t r = 0; r < idx.size(); ++r) (*dx)[r * k + static_cast<std::size_t>(idx[r])] += n.grad[r];
    }
  });
}

}  // namespace ssvae::nn
