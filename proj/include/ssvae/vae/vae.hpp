#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include "ssvae/models/networks.hpp"
#include "ssvae/nn/autograd.hpp"
#include "ssvae/nn/param_store.hpp"
#include "ssvae/rng.hpp"
#include "ssvae/tensor.hpp"

namespace ssvae::vae {

using models::ArchConfig;
using nn::ForwardContext;
using nn::Var;

inline constexpr float kLogVarMin = -10.0f;
inline constexpr float kLogVarMax = 10.0f;

/// Diagonal Gaussian q(z|x) per row: mu [B,D], log_var [B,D] (natural log of sigma^2).
struct GaussianPosterior {
  Var mu;
  Var log_var;
  std::size_t batch() const { return mu.dim(0); }
  std::size_t dim() const { return mu.dim(1); }
};

/// Encoder q(z|x) and decoder p(x|z) (or p(x|y,z) when conditioning > 0; the
/// decoder input is then concat(z, one_hot(y))). All parameters live in one
/// store: "encoder.*" and "decoder.*", to which owners such as M2 may add more.
class VaeModel {
 public:
  explicit VaeModel(ArchConfig arch = {}, std::uint64_t init_seed = 0, std::size_t conditioning = 0);

  VaeModel(VaeModel&&) noexcept = default;
  VaeModel& operator=(VaeModel&&) noexcept = default;
  VaeModel(const VaeModel&) = delete;
  VaeModel& operator=(const VaeModel&) = delete;

  const ArchConfig& arch() const { return arch_; }
  nn::ParamStore& params() { return *store_; }
  const nn::ParamStore& params() const { return *store_; }
  const models::Encoder& encoder() const { return encoder_; }
  const models::Decoder& decoder() const { return decoder_; }
  std::size_t latent_dim() const { return arch_.latent_dim; }
  std::size_t input_dim() const { return arch_.input_dim; }
  std::size_t conditioning_dim() const { return conditioning_; }

  bool trained() const { return trained_; }
  void set_trained(bool trained) { trained_ = trained; }

 private:
  ArchConfig arch_;
  std::size_t conditioning_ = 0;
  std::unique_ptr<nn::ParamStore> store_;
  models::Encoder encoder_;
  models::Decoder decoder_;
  bool trained_ = false;
};

/// Posterior parameters for x [B,input_dim]; log_var is clamped to
/// [kLogVarMin, kLogVarMax].
GaussianPosterior encode(const VaeModel& model, const Var& x, const ForwardContext& ctx);

/// z = mu + exp(log_var / 2) * eps for L fresh draws; result [L,B,D]. The
/// noise is a constant, so gradients reach mu and log_var only.
Var reparameterize(const GaussianPosterior& post, RngStream& rng, std::size_t samples);
/// Same with pinned noise eps [L,B,D].
Var reparameterize(const GaussianPosterior& post, const Tensor& eps);

/// 0.5 * sum_d (mu^2 + sigma^2 - 1 - log sigma^2), one value per row -> [B].
Var kl_standard_normal(const GaussianPosterior& post);

/// Reconstruction mean for decoder input [N, latent_dim + conditioning] -> [N,input_dim].
Var decode(const VaeModel& model, const Var& z);

/// log N(x | x_hat, I) per row: -0.5 ||x - x_hat||^2 - (D/2) ln 2 pi -> [N].
Var gaussian_log_likelihood(const Var& x, const Var& x_hat);

struct ElboTerms {
  Var recon;  // [1] batch mean of the MC estimate of E_q[log p(x|z)]
  Var kl;     // [1] batch mean KL
  Var value;  // [1] recon - beta * kl
  float recon_value() const { return recon.value()[0]; }
  float kl_value() const { return kl.value()[0]; }
  float elbo_value() const { return value.value()[0]; }
};

/// beta-weighted ELBO of an unconditioned model with L Monte Carlo samples.
ElboTerms elbo(const VaeModel& model, const Var& x, float beta, RngStream& noise, std::size_t samples,
               const ForwardContext& ctx);
/// Same with pinned noise eps [L,B,latent_dim].
ElboTerms elbo(const VaeModel& model, const Var& x, float beta, const Tensor& eps, const ForwardContext& ctx);

/// Eval-mode posterior means for every row of segments [N,input_dim].
Tensor posterior_means(const VaeModel& model, const Tensor& segments, std::size_t batch_size = 200);

/// Eval-mode reconstructions: decode(mu), or decode(mu + sigma * eps) with
/// eps drawn from `noise` when sample is true. Unconditioned models only.
Tensor reconstruct(const VaeModel& model, const Tensor& segments, bool sample, RngStream* noise = nullptr,
                   std::size_t batch_size = 200);

/// Eval-mode ELBO over a dataset with L samples per row (default 16).
struct ElboSummary {
  double recon = 0.0, kl = 0.0, value = 0.0;
};
ElboSummary evaluate_elbo(const VaeModel& model, const Tensor& segments, std::uint64_t seed,
                          std::size_t samples = 16, float beta = 1.0f, std::size_t batch_size = 200);

void save_vae(const VaeModel& model, const std::filesystem::path& path, const std::string& kind = "vae");
VaeModel load_vae(const std::filesystem::path& path);

}  // namespace ssvae::vae
