#pragma once

// Network bodies shared by the VAE, M2, the autoencoder and the CNN.
//
// Encoder:    x[B,D] -> conv -> BN -> relu -> dropout -> conv -> BN -> relu
//             -> dropout -> flatten -> FC -> [B, out_dim]
// Decoder:    in[B,P] -> FC -> relu -> [B,C0,L0] -> tconv -> relu -> tconv
//             -> relu -> tconv (linear) -> [B,D]
// Classifier: x[B,D] -> conv -> relu -> pool -> conv -> relu -> pool
//             -> dropout -> flatten -> FC -> logits [B,K]

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ssvae/nn/layers.hpp"
#include "ssvae/nn/param_store.hpp"

namespace ssvae::models {

using nn::ConvGeometry;
using nn::ForwardContext;
using nn::Var;

struct ArchConfig {
  std::size_t input_dim = 1024;
  std::size_t latent_dim = 128;
  float dropout = 0.25f;
  float bn_momentum = 0.9f;

  std::vector<ConvGeometry> encoder_convs{{1, 16, 8, 4, 0}, {16, 32, 8, 4, 0}};
  /// The decoder FC output length is solved so that the chain ends at input_dim.
  std::vector<ConvGeometry> decoder_tconvs{{32, 16, 11, 4, 0}, {16, 8, 8, 4, 0}, {8, 1, 1, 1, 0}};
  std::vector<ConvGeometry> classifier_convs{{1, 16, 8, 2, 0}, {16, 32, 8, 2, 0}};
  std::size_t classifier_pool = 2;

  /// Throws ConfigError when the geometry does not chain.
  void validate() const;
};

/// Small geometry for tests and quick runs: input 64, latent 4.
ArchConfig tiny_arch();

class Encoder {
 public:
  Encoder() = default;
  Encoder(nn::ParamStore& store, const std::string& prefix, const ArchConfig& arch, std::size_t out_dim,
          RngStream& init);
  Var forward(const Var& x, const ForwardContext& ctx) const;
  std::size_t out_dim() const { return out_dim_; }

 private:
  std::size_t input_dim_ = 0, out_dim_ = 0;
  float dropout_ = 0.0f;
  std::vector<nn::Conv1dLayer> convs_;
  std::vector<nn::BatchNormLayer> norms_;
  nn::DenseLayer fc_;
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(nn::ParamStore& store, const std::string& prefix, const ArchConfig& arch, std::size_t in_dim,
          RngStream& init);
  Var forward(const Var& in) const;
  std::size_t in_dim() const { return in_dim_; }
  std::size_t start_length() const { return start_len_; }

 private:
  std::size_t in_dim_ = 0, output_dim_ = 0, start_channels_ = 0, start_len_ = 0;
  nn::DenseLayer fc_;
  std::vector<nn::TransposeConv1dLayer> tconvs_;
};

class ClassifierNet {
 public:
  ClassifierNet() = default;
  ClassifierNet(nn::ParamStore& store, const std::string& prefix, const ArchConfig& arch, std::size_t classes,
                RngStream& init);
  /// Unnormalized logits [B,K].
  Var logits(const Var& x, const ForwardContext& ctx) const;
  std::size_t classes() const { return classes_; }
  nn::DenseLayer& output_layer() { return fc_; }

 private:
  std::size_t input_dim_ = 0, classes_ = 0, pool_ = 2;
  float dropout_ = 0.0f;
  std::vector<nn::Conv1dLayer> convs_;
  nn::DenseLayer fc_;
};

/// Length after the encoder's conv stack (or classifier's conv+pool stack).
std::size_t encoder_feature_length(const ArchConfig& arch);
std::size_t classifier_feature_length(const ArchConfig& arch);
/// Decoder FC output length such that the transpose-conv chain yields input_dim.
std::size_t decoder_start_length(const ArchConfig& arch);

/// Writes ArchConfig fields into / reads them from checkpoint meta entries.
void arch_to_meta(const ArchConfig& arch, std::map<std::string, std::string>& meta);
ArchConfig arch_from_meta(const std::map<std::string, std::string>& meta);

}  // namespace ssvae::models
