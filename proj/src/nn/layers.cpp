#include "ssvae/nn/layers.hpp"

#include <algorithm>

#include "ssvae/error.hpp"

namespace ssvae::nn {

DenseLayer::DenseLayer(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                       RngStream& init)
    : name_(name), in_(in), out_(out) {
  weight_ = &store.add(name + ".weight", fan_in_uniform({in, out}, in, init));
  bias_ = &store.add(name + ".bias", Tensor({out}));
}

Var DenseLayer::forward(const Var& x) const {
  Var y = dense(x, param(*weight_), param(*bias_));
  check_finite(y, name_);
  return y;
}

Conv1dLayer::Conv1dLayer(ParamStore& store, const std::string& name, ConvGeometry geometry, RngStream& init,
                         bool with_bias)
    : name_(name), geom_(geometry) {
  if (geom_.stride == 0) throw ConfigError(name + ": stride must be >= 1");
  weight_ = &store.add(name + ".weight",
                       fan_in_uniform({geom_.out_channels, geom_.in_channels, geom_.kernel},
                                      geom_.in_channels * geom_.kernel, init));
  if (with_bias) bias_ = &store.add(name + ".bias", Tensor({geom_.out_channels}));
}

std::size_t Conv1dLayer::output_length(std::size_t length) const {
  return conv1d_output_length(length, geom_.kernel, geom_.stride, geom_.padding);
}

Var Conv1dLayer::forward(const Var& x) const {
  Var y = conv1d(x, param(*weight_), geom_.stride, geom_.padding);
  if (bias_) y = add_channel_bias(y, param(*bias_));
  check_finite(y, name_);
  return y;
}

TransposeConv1dLayer::TransposeConv1dLayer(ParamStore& store, const std::string& name, ConvGeometry geometry,
                                           RngStream& init)
    : name_(name), geom_(geometry) {
  if (geom_.stride == 0) throw ConfigError(name + ": stride must be >= 1");
  // Each output position receives about in_channels * kernel / stride terms.
  const std::size_t fan_in = std::max<std::size_t>(1, geom_.in_channels * geom_.kernel / geom_.stride);
  weight_ = &store.add(name + ".weight",
                       fan_in_uniform({geom_.in_channels, geom_.out_channels, geom_.kernel}, fan_in, init));
  bias_ = &store.add(name + ".bias", Tensor({geom_.out_channels}));
}

std::size_t TransposeConv1dLayer::output_length(std::size_t length) const {
  return transpose_conv1d_output_length(length, geom_.kernel, geom_.stride);
}

Var TransposeConv1dLayer::forward(const Var& x) const {
  Var y = add_channel_bias(transpose_conv1d(x, param(*weight_), geom_.stride), param(*bias_));
  check_finite(y, name_);
  return y;
}

BatchNormLayer::BatchNormLayer(ParamStore& store, const std::string& name, std::size_t channels, float momentum)
    : name_(name), momentum_(momentum) {
  gamma_ = &store.add(name + ".gamma", Tensor({channels}, 1.0f));
  beta_ = &store.add(name + ".beta", Tensor({channels}));
  running_mean_ = &store.add(name + ".running_mean", Tensor({channels}), false);
  running_var_ = &store.add(name + ".running_var", Tensor({channels}, 1.0f), false);
}

Var BatchNormLayer::forward(const Var& x, bool training) const {
  BatchNormState state{&running_mean_->value, &running_var_->value, momentum_, 1e-5f};
  Var y = batch_norm(x, param(*gamma_), param(*beta_), state, training);
  check_finite(y, name_);
  return y;
}

}  // namespace ssvae::nn
