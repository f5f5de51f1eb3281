#include "ssvae/vae/vae.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "ssvae/error.hpp"
#include "ssvae/nn/checkpoint.hpp"
#include "ssvae/nn/ops.hpp"

namespace ssvae::vae {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

ConfigError conditioning_error(const char* what) {
  return ConfigError(std::string(what) + " needs an unconditioned model; use the M2 entry points");
}

}  // namespace

VaeModel::VaeModel(ArchConfig arch, std::uint64_t init_seed, std::size_t conditioning)
    : arch_(std::move(arch)), conditioning_(conditioning), store_(std::make_unique<nn::ParamStore>()) {
  arch_.validate();
  RngStream init(init_seed);
  RngStream enc_init = init.split(1), dec_init = init.split(2);
  encoder_ = models::Encoder(*store_, "encoder", arch_, 2 * arch_.latent_dim, enc_init);
  decoder_ = models::Decoder(*store_, "decoder", arch_, arch_.latent_dim + conditioning_, dec_init);
}

GaussianPosterior encode(const VaeModel& model, const Var& x, const ForwardContext& ctx) {
  Var h = model.encoder().forward(x, ctx);
  const std::size_t d = model.latent_dim();
  GaussianPosterior post{nn::slice_cols(h, 0, d), nn::clamp(nn::slice_cols(h, d, 2 * d), kLogVarMin, kLogVarMax)};
  nn::check_finite(post.mu, "encoder.mu");
  nn::check_finite(post.log_var, "encoder.log_var");
  return post;
}

Var reparameterize(const GaussianPosterior& post, RngStream& rng, std::size_t samples) {
  if (samples == 0) throw ConfigError("reparameterize: need at least one sample");
  Tensor eps({samples, post.batch(), post.dim()});
  rng.fill_normal(eps.values());
  return reparameterize(post, eps);
}

Var reparameterize(const GaussianPosterior& post, const Tensor& eps) {
  const std::size_t b = post.batch(), d = post.dim();
  if (eps.rank() != 3 || eps.dim(1) != b || eps.dim(2) != d) {
    throw ConfigError("reparameterize: noise " + shape_str(eps.shape()) + " does not match posterior [" +
                      std::to_string(b) + "," + std::to_string(d) + "]");
  }
  const std::size_t samples = eps.dim(0);
  Var sigma = nn::exp(nn::scale(post.log_var, 0.5f));
  Var mu_t = nn::tile_rows(post.mu, samples);
  Var sigma_t = nn::tile_rows(sigma, samples);
  Var z = nn::add(mu_t, nn::mul(sigma_t, nn::constant(eps.reshaped({samples * b, d}))));
  return nn::reshape(z, {samples, b, d});
}

Var kl_standard_normal(const GaussianPosterior& post) {
  // mu^2 + exp(log_var) - 1 - log_var, summed per row.
  Var terms = nn::sub(nn::add(nn::mul(post.mu, post.mu), nn::exp(post.log_var)), post.log_var);
  Var per_row = nn::sum_rows(terms);
  const std::size_t d = post.dim();
  Tensor offset({post.batch()}, -static_cast<float>(d));
  return nn::scale(nn::add(per_row, nn::constant(offset)), 0.5f);
}

Var decode(const VaeModel& model, const Var& z) {
  Var x_hat = model.decoder().forward(z);
  nn::check_finite(x_hat, "decoder.output");
  return x_hat;
}

Var gaussian_log_likelihood(const Var& x, const Var& x_hat) {
  if (x.shape() != x_hat.shape() || x.value().rank() != 2) {
    throw ConfigError("gaussian_log_likelihood: shapes " + shape_str(x.shape()) + " and " +
                      shape_str(x_hat.shape()) + " differ");
  }
  Var diff = nn::sub(x, x_hat);
  Var sq = nn::sum_rows(nn::mul(diff, diff));
  const float constant = static_cast<float>(-0.5 * static_cast<double>(x.dim(1)) * kLog2Pi);
  return nn::add(nn::scale(sq, -0.5f), nn::constant(Tensor({x.dim(0)}, constant)));
}

ElboTerms elbo(const VaeModel& model, const Var& x, float beta, RngStream& noise, std::size_t samples,
               const ForwardContext& ctx) {
  if (samples == 0) throw ConfigError("elbo: need at least one sample");
  Tensor eps({samples, x.dim(0), model.latent_dim()});
  noise.fill_normal(eps.values());
  return elbo(model, x, beta, eps, ctx);
}

ElboTerms elbo(const VaeModel& model, const Var& x, float beta, const Tensor& eps, const ForwardContext& ctx) {
  if (model.conditioning_dim() != 0) throw conditioning_error("elbo");
  if (beta < 0.0f || beta > 1.0f) throw ConfigError("elbo: beta must be in [0, 1]");
  const std::size_t b = x.dim(0), samples = eps.dim(0);
  GaussianPosterior post = encode(model, x, ctx);
  Var z = reparameterize(post, eps);
  Var x_hat = decode(model, nn::reshape(z, {samples * b, model.latent_dim()}));
  Var ll = gaussian_log_likelihood(nn::tile_rows(x, samples), x_hat);
  ElboTerms t;
  t.recon = nn::mean_all(ll);  // mean over L*B equals batch mean of the per-row MC average
  t.kl = nn::mean_all(kl_standard_normal(post));
  t.value = beta == 0.0f ? t.recon : nn::sub(t.recon, nn::scale(t.kl, beta));
  return t;
}

namespace {

template <typename Fn>
void for_each_batch(std::size_t n, std::size_t batch_size, Fn&& fn) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    fn(start, idx);
  }
}

void expect_segments(const VaeModel& model, const Tensor& segments) {
  if (segments.rank() != 2 || segments.dim(1) != model.input_dim()) {
    throw ConfigError("expected segments [N," + std::to_string(model.input_dim()) + "], got " +
                      shape_str(segments.shape()));
  }
}

}  // namespace

Tensor posterior_means(const VaeModel& model, const Tensor& segments, std::size_t batch_size) {
  expect_segments(model, segments);
  const std::size_t d = model.latent_dim();
  Tensor out({segments.dim(0), d});
  for_each_batch(segments.dim(0), batch_size, [&](std::size_t start, const std::vector<std::size_t>& idx) {
    auto post = encode(model, nn::constant(gather_rows(segments, idx)), {});
    std::copy_n(post.mu.value().data(), idx.size() * d, out.data() + start * d);
  });
  return out;
}

Tensor reconstruct(const VaeModel& model, const Tensor& segments, bool sample, RngStream* noise,
                   std::size_t batch_size) {
  if (model.conditioning_dim() != 0) throw conditioning_error("reconstruct");
  expect_segments(model, segments);
  if (sample && !noise) throw ConfigError("reconstruct: sampling needs a noise stream");
  const std::size_t dim = model.input_dim();
  Tensor out(segments.shape());
  for_each_batch(segments.dim(0), batch_size, [&](std::size_t start, const std::vector<std::size_t>& idx) {
    auto post = encode(model, nn::constant(gather_rows(segments, idx)), {});
    Var z = sample ? nn::reshape(reparameterize(post, *noise, 1), {idx.size(), model.latent_dim()}) : post.mu;
    Var x_hat = decode(model, z);
    std::copy_n(x_hat.value().data(), idx.size() * dim, out.data() + start * dim);
  });
  return out;
}

ElboSummary evaluate_elbo(const VaeModel& model, const Tensor& segments, std::uint64_t seed, std::size_t samples,
                          float beta, std::size_t batch_size) {
  expect_segments(model, segments);
  RngStream noise(seed);
  ElboSummary s;
  const double n = static_cast<double>(segments.dim(0));
  for_each_batch(segments.dim(0), batch_size, [&](std::size_t, const std::vector<std::size_t>& idx) {
    auto t = elbo(model, nn::constant(gather_rows(segments, idx)), beta, noise, samples, {});
    const double w = static_cast<double>(idx.size()) / n;
    s.recon += w * t.recon_value();
    s.kl += w * t.kl_value();
    s.value += w * t.elbo_value();
  });
  return s;
}

void save_vae(const VaeModel& model, const std::filesystem::path& path, const std::string& kind) {
  nn::Checkpoint ck;
  ck.kind = kind;
  models::arch_to_meta(model.arch(), ck.meta);
  ck.meta["conditioning"] = std::to_string(model.conditioning_dim());
  ck.meta["trained"] = model.trained() ? "1" : "0";
  nn::append_store(ck, model.params());
  nn::save_checkpoint(path, ck);
}

VaeModel load_vae(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.kind != "vae" && ck.kind != "m1") {
    throw DataError("checkpoint " + path.string() + " holds a '" + ck.kind + "' model, expected vae or m1");
  }
  VaeModel model(models::arch_from_meta(ck.meta), 0, ck.meta_size("conditioning"));
  nn::restore_store(ck, model.params());
  model.set_trained(ck.meta_value("trained") == "1");
  return model;
}

}  // namespace ssvae::vae
