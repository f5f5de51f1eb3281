#pragma once

#include <string>

#include "ssvae/nn/ops.hpp"
#include "ssvae/nn/param_store.hpp"

namespace ssvae::nn {

/// Mode and noise source for one forward pass. Dropout draws from rng only
/// in training mode.
struct ForwardContext {
  bool training = false;
  RngStream* rng = nullptr;
};

/// Affine map; parameters "<name>.weight" [in,out] and "<name>.bias" [out].
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, RngStream& init);
  Var forward(const Var& x) const;
  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }
  ParamEntry& weight() const { return *weight_; }
  ParamEntry& bias() const { return *bias_; }

 private:
  std::string name_;
  std::size_t in_ = 0, out_ = 0;
  ParamEntry* weight_ = nullptr;
  ParamEntry* bias_ = nullptr;
};

struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// conv1d + optional per-channel bias; weight [out,in,K].
class Conv1dLayer {
 public:
  Conv1dLayer() = default;
  Conv1dLayer(ParamStore& store, const std::string& name, ConvGeometry geometry, RngStream& init,
              bool with_bias = true);
  Var forward(const Var& x) const;
  const ConvGeometry& geometry() const { return geom_; }
  std::size_t output_length(std::size_t length) const;

 private:
  std::string name_;
  ConvGeometry geom_;
  ParamEntry* weight_ = nullptr;
  ParamEntry* bias_ = nullptr;
};

/// transpose_conv1d + per-channel bias; weight [in,out,K]. Padding is unused.
class TransposeConv1dLayer {
 public:
  TransposeConv1dLayer() = default;
  TransposeConv1dLayer(ParamStore& store, const std::string& name, ConvGeometry geometry, RngStream& init);
  Var forward(const Var& x) const;
  const ConvGeometry& geometry() const { return geom_; }
  std::size_t output_length(std::size_t length) const;

 private:
  std::string name_;
  ConvGeometry geom_;
  ParamEntry* weight_ = nullptr;
  ParamEntry* bias_ = nullptr;
};

class BatchNormLayer {
 public:
  BatchNormLayer() = default;
  BatchNormLayer(ParamStore& store, const std::string& name, std::size_t channels, float momentum = 0.9f);
  Var forward(const Var& x, bool training) const;

 private:
  std::string name_;
  float momentum_ = 0.9f;
  ParamEntry* gamma_ = nullptr;
  ParamEntry* beta_ = nullptr;
  ParamEntry* running_mean_ = nullptr;
  ParamEntry* running_var_ = nullptr;
};

}  // namespace ssvae::nn
