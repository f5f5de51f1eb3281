#include "ssvae/ssl/m2.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ssvae/error.hpp"
#include "ssvae/nn/checkpoint.hpp"
#include "ssvae/nn/ops.hpp"
#include "ssvae/nn/optim.hpp"
#include "ssvae/ssl/labels.hpp"

namespace ssvae::ssl {

namespace {

Tensor one_hot_rows(std::span<const int> labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) t.at(i, static_cast<std::size_t>(labels[i])) = 1.0f;
  return t;
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) throw ConfigError("M2: label count does not match the labeled batch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ConfigError("M2: label " + std::to_string(y) + " outside [0," + std::to_string(classes) + ")");
    }
  }
}

void check_eps(const Tensor& eps, std::size_t batch, std::size_t latent) {
  if (eps.rank() != 3 || eps.dim(0) == 0 || eps.dim(1) != batch || eps.dim(2) != latent) {
    throw ConfigError("M2: noise " + shape_str(eps.shape()) + " does not match [L," + std::to_string(batch) + "," +
                      std::to_string(latent) + "]");
  }
}

// -log p(x | y, z) averaged over the L draws, for decoder inputs whose rows are
// ordered [block][l][b] with `blocks` one-hot blocks; returns [B, blocks].
Var neg_recon(const M2Model& model, const Var& x, const Var& z_flat, const Tensor& one_hot, std::size_t samples,
              std::size_t blocks) {
  const std::size_t b = x.dim(0);
  Var z_all = blocks == 1 ? z_flat : nn::tile_rows(z_flat, blocks);
  Var x_hat = vae::decode(model.vae(), nn::concat_cols(z_all, nn::constant(one_hot)));
  Var ll = vae::gaussian_log_likelihood(nn::tile_rows(x, samples * blocks), x_hat);  // [blocks*L*B]
  // [blocks*L, B] -> [B, blocks*L] -> [B*blocks, L] -> mean over L.
  Var by_sample = nn::transpose2d(nn::reshape(ll, {blocks * samples, b}));
  Var per_block = nn::sum_rows(nn::reshape(by_sample, {b * blocks, samples}));
  return nn::scale(nn::reshape(per_block, {b, blocks}), -1.0f / static_cast<float>(samples));
}

Var flat_z(const vae::GaussianPosterior& post, const Tensor& eps) {
  return nn::reshape(vae::reparameterize(post, eps), {eps.dim(0) * post.batch(), post.dim()});
}

double mean_value(const Var& v) {
  double s = 0.0;
  for (float e : v.value().values()) s += e;
  return v.value().size() == 0 ? 0.0 : s / static_cast<double>(v.value().size());
}

Tensor draw_eps(RngStream& rng, std::size_t samples, std::size_t batch, std::size_t latent) {
  Tensor eps({samples, batch, latent});
  rng.fill_normal(eps.values());
  return eps;
}

}  // namespace

float m2_default_alpha(std::size_t labeled) { return 0.1f * static_cast<float>(labeled); }

M2Model::M2Model(models::ArchConfig arch, std::size_t classes, std::uint64_t init_seed, float alpha)
    : classes_(classes), alpha_(alpha), vae_(arch, init_seed, classes) {
  if (classes < 2) throw ConfigError("M2 needs at least 2 classes");
  set_alpha(alpha);
  prior_.assign(classes, 1.0f / static_cast<float>(classes));
  RngStream init = RngStream(init_seed).split(3);
  classifier_ = models::ClassifierNet(vae_.params(), "classifier", vae_.arch(), classes, init);
}

void M2Model::set_alpha(float alpha) {
  if (!(alpha >= 0.0f) || !std::isfinite(alpha)) throw ConfigError("M2: alpha must be finite and >= 0");
  alpha_ = alpha;
}

Var m2_logits(const M2Model& model, const Var& x, const ForwardContext& ctx) {
  Var logits = model.classifier().logits(x, ctx);
  nn::check_finite(logits, "classifier.logits");
  return logits;
}

LabelPosterior m2_classify(const M2Model& model, const Tensor& x, std::size_t batch_size) {
  if (x.rank() != 2 || x.dim(1) != model.arch().input_dim) {
    throw ConfigError("m2_classify: expected [N," + std::to_string(model.arch().input_dim) + "], got " +
                      shape_str(x.shape()));
  }
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const std::size_t n = x.dim(0), k = model.classes();
  LabelPosterior out{Tensor({n, k})};
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Var p = nn::softmax(m2_logits(model, nn::constant(gather_rows(x, idx)), {}));
    std::copy_n(p.value().data(), idx.size() * k, out.probs.data() + start * k);
  }
  return out;
}

Var categorical_entropy(const Var& logits) {
  Var log_q = nn::log_softmax(logits);
  return nn::scale(nn::sum_rows(nn::mul(nn::exp(log_q), log_q)), -1.0f);
}

LabeledTerms m2_labeled_terms(const M2Model& model, const Var& x, std::span<const int> labels, float beta,
                              const Tensor& eps, const ForwardContext& ctx) {
  const std::size_t b = x.dim(0), k = model.classes(), samples = eps.dim(0);
  check_labels(labels, b, k);
  check_eps(eps, b, model.vae().latent_dim());
  vae::GaussianPosterior post = vae::encode(model.vae(), x, ctx);
  Tensor hot = one_hot_rows(labels, k);
  Tensor hot_tiled({samples * b, k});
  for (std::size_t l = 0; l < samples; ++l) std::copy_n(hot.data(), b * k, hot_tiled.data() + l * b * k);
  Var recon = nn::reshape(neg_recon(model, x, flat_z(post, eps), hot_tiled, samples, 1), {b});
  Tensor log_prior({b});
  for (std::size_t i = 0; i < b; ++i) log_prior[i] = std::log(model.prior()[static_cast<std::size_t>(labels[i])]);
  Var l = nn::add(nn::sub(recon, nn::constant(log_prior)), nn::scale(vae::kl_standard_normal(post), beta));
  Var log_q = nn::pick(nn::log_softmax(m2_logits(model, x, ctx)), labels);
  return {l, nn::scale(log_q, -model.alpha())};
}

UnlabeledTerms m2_unlabeled_terms(const M2Model& model, const Var& x, float beta, const Tensor& eps,
                                  const ForwardContext& ctx) {
  const std::size_t b = x.dim(0), k = model.classes(), samples = eps.dim(0);
  check_eps(eps, b, model.vae().latent_dim());
  vae::GaussianPosterior post = vae::encode(model.vae(), x, ctx);
  Tensor hot({k * samples * b, k});
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t r = 0; r < samples * b; ++r) hot.at(c * samples * b + r, c) = 1.0f;
  }
  Var recon = neg_recon(model, x, flat_z(post, eps), hot, samples, k);  // [B,K]
  Tensor log_prior({b, k});
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t c = 0; c < k; ++c) log_prior.at(i, c) = std::log(model.prior()[c]);
  }
  Var kl = nn::broadcast_cols(nn::scale(vae::kl_standard_normal(post), beta), k);
  Var l_per_class = nn::add(nn::sub(recon, nn::constant(log_prior)), kl);

  Var logits = m2_logits(model, x, ctx);
  Var log_q = nn::log_softmax(logits);
  Var q = nn::exp(log_q);
  Var entropy = nn::scale(nn::sum_rows(nn::mul(q, log_q)), -1.0f);
  Var u = nn::sub(nn::sum_rows(nn::mul(q, l_per_class)), entropy);
  return {u, l_per_class, log_q, entropy};
}

M2Objective m2_objective(const M2Model& model, const Tensor& x_labeled, std::span<const int> labels,
                         const Tensor& eps_labeled, const Tensor& x_unlabeled, const Tensor& eps_unlabeled,
                         float beta, const ForwardContext& ctx) {
  if (beta < 0.0f || beta > 1.0f) throw ConfigError("M2: beta must be in [0, 1]");
  M2Objective obj;
  Var total;
  if (x_labeled.rank() == 2 && x_labeled.dim(0) > 0) {
    LabeledTerms t = m2_labeled_terms(model, nn::constant(x_labeled), labels, beta, eps_labeled, ctx);
    Var l = nn::mean_all(t.l), cls = nn::mean_all(t.cls);
    obj.values.l_labeled = l.value()[0];
    obj.values.cls_term = cls.value()[0];
    total = nn::add(l, cls);
  }
  if (x_unlabeled.rank() == 2 && x_unlabeled.dim(0) > 0) {
    UnlabeledTerms t = m2_unlabeled_terms(model, nn::constant(x_unlabeled), beta, eps_unlabeled, ctx);
    Var u = nn::mean_all(t.u);
    obj.values.u_unlabeled = u.value()[0];
    total = total.defined() ? nn::add(total, u) : u;
  }
  if (!total.defined()) throw ConfigError("M2 objective needs a labeled or an unlabeled batch");
  obj.total = total;
  obj.values.total = total.value()[0];
  return obj;
}

SemiSupLosses m2_loss_labeled(const M2Model& model, const Tensor& x, std::span<const int> labels, RngStream& rng,
                              float beta, std::size_t samples) {
  if (samples == 0) throw ConfigError("M2: need at least one Monte Carlo sample");
  Tensor eps = draw_eps(rng, samples, x.dim(0), model.vae().latent_dim());
  LabeledTerms t = m2_labeled_terms(model, nn::constant(x), labels, beta, eps, {});
  SemiSupLosses s;
  s.l_labeled = mean_value(t.l);
  s.cls_term = mean_value(t.cls);
  s.total = s.l_labeled + s.cls_term;
  return s;
}

double m2_loss_unlabeled(const M2Model& model, const Tensor& x, RngStream& rng, float beta, std::size_t samples) {
  if (samples == 0) throw ConfigError("M2: need at least one Monte Carlo sample");
  Tensor eps = draw_eps(rng, samples, x.dim(0), model.vae().latent_dim());
  return mean_value(m2_unlabeled_terms(model, nn::constant(x), beta, eps, {}).u);
}

void M2FitConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (mc_samples == 0) throw ConfigError("need at least one Monte Carlo sample");
  if (optimizer.lr <= 0.0f) throw ConfigError("learning rate must be positive");
  beta.validate();
}

M2TrainingLog m2_fit(M2Model& model, const Tensor& labeled, std::span<const int> labels, const Tensor& unlabeled,
                     const M2FitConfig& config) {
  config.validate();
  const std::size_t dim = model.arch().input_dim;
  if (labeled.rank() != 2 || labeled.dim(1) != dim || labeled.dim(0) == 0) {
    throw ConfigError("m2_fit: need at least one labeled segment of length " + std::to_string(dim));
  }
  check_labels(labels, labeled.dim(0), model.classes());
  const std::size_t n_l = labeled.dim(0);
  const std::size_t n_u = unlabeled.rank() == 2 ? unlabeled.dim(0) : 0;
  if (n_u > 0 && unlabeled.dim(1) != dim) throw ConfigError("m2_fit: unlabeled segments have the wrong length");

  RngStream root(config.seed);
  RngStream order_u = root.split(1), order_l = root.split(2), dropout = root.split(3), noise = root.split(4);
  nn::ParamStore& store = model.params();
  store.zero_grad();
  const std::size_t latent = model.vae().latent_dim();
  const std::size_t lb = std::min(config.batch_size, n_l);
  const std::size_t steps = n_u > 0 ? (n_u + config.batch_size - 1) / config.batch_size
                                    : (n_l + config.batch_size - 1) / config.batch_size;

  std::vector<std::size_t> perm_l = order_l.permutation(n_l);
  std::size_t cursor_l = 0;
  M2TrainingLog log;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const nn::StoreSnapshot snapshot = nn::take_snapshot(store);
    const float beta = config.anneal_beta ? config.beta.at(epoch) : 1.0f;
    const std::vector<std::size_t> perm_u = n_u > 0 ? order_u.permutation(n_u) : std::vector<std::size_t>{};
    M2EpochLog row;
    row.epoch = epoch;
    row.beta = beta;
    try {
      for (std::size_t step = 0; step < steps; ++step) {
        // Labeled batch: consecutive slice of the current permutation, recycled.
        std::vector<std::size_t> idx_l;
        idx_l.reserve(lb);
        while (idx_l.size() < lb) {
          if (cursor_l == n_l) {
            perm_l = order_l.permutation(n_l);
            cursor_l = 0;
          }
          idx_l.push_back(perm_l[cursor_l++]);
        }
        std::vector<int> y(idx_l.size());
        for (std::size_t i = 0; i < idx_l.size(); ++i) y[i] = labels[idx_l[i]];
        Tensor x_l = gather_rows(labeled, idx_l);
        Tensor eps_l = draw_eps(noise, config.mc_samples, idx_l.size(), latent);

        Tensor x_u, eps_u;
        if (n_u > 0) {
          const std::size_t start = step * config.batch_size, end = std::min(n_u, start + config.batch_size);
          x_u = gather_rows(unlabeled, std::span<const std::size_t>(perm_u.data() + start, end - start));
          eps_u = draw_eps(noise, config.mc_samples, end - start, latent);
        }
        ForwardContext ctx{true, &dropout};
        M2Objective obj = m2_objective(model, x_l, y, eps_l, x_u, eps_u, beta, ctx);
        if (!std::isfinite(obj.values.total)) throw NumericError("non-finite M2 objective");
        nn::backward(obj.total);
        nn::rmsprop_step(store, config.optimizer);
        const double w = 1.0 / static_cast<double>(steps);
        row.losses.l_labeled += w * obj.values.l_labeled;
        row.losses.u_unlabeled += w * obj.values.u_unlabeled;
        row.losses.cls_term += w * obj.values.cls_term;
        row.losses.total += w * obj.values.total;
      }
    } catch (const NumericError& e) {
      nn::restore_snapshot(store, snapshot);
      if (!config.divergence_checkpoint.empty()) save_m2(model, config.divergence_checkpoint);
      throw TrainingDiverged("M2 training diverged in epoch " + std::to_string(epoch) + ": " + e.what(), epoch);
    }
    log.epochs.push_back(row);
    if (config.on_epoch) config.on_epoch(row);
  }
  model.set_trained(true);
  return log;
}

std::string m2_training_csv(const M2TrainingLog& log) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,L_labeled,U_unlabeled,cls,total\n";
  for (const auto& e : log.epochs) {
    out << e.epoch << ',' << e.losses.l_labeled << ',' << e.losses.u_unlabeled << ',' << e.losses.cls_term << ','
        << e.losses.total << '\n';
  }
  return out.str();
}

std::vector<int> predict(const M2Model& model, const Tensor& x) {
  if (!model.trained()) throw ConfigError("M2 model is untrained");
  return argmax_rows(m2_classify(model, x).probs.values(), model.classes());
}

Tensor m2_reconstruct(const M2Model& model, const Tensor& x, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const std::vector<int> y = argmax_rows(m2_classify(model, x, batch_size).probs.values(), model.classes());
  const std::size_t dim = model.arch().input_dim;
  Tensor out(x.shape());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.dim(0); start += batch_size) {
    const std::size_t end = std::min(x.dim(0), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const auto post = vae::encode(model.vae(), nn::constant(gather_rows(x, idx)), {});
    const Tensor hot = one_hot_rows(std::span<const int>(y).subspan(start, idx.size()), model.classes());
    Var x_hat = vae::decode(model.vae(), nn::concat_cols(post.mu, nn::constant(hot)));
    std::copy_n(x_hat.value().data(), idx.size() * dim, out.data() + start * dim);
  }
  return out;
}

void save_m2(const M2Model& model, const std::filesystem::path& path) {
  nn::Checkpoint ck;
  ck.kind = "m2";
  models::arch_to_meta(model.arch(), ck.meta);
  ck.meta["classes"] = std::to_string(model.classes());
  std::ostringstream a;
  a.precision(9);
  a << model.alpha();
  ck.meta["alpha"] = a.str();
  ck.meta["trained"] = model.trained() ? "1" : "0";
  nn::append_store(ck, model.params());
  nn::save_checkpoint(path, ck);
}

M2Model load_m2(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.kind != "m2") throw DataError("checkpoint " + path.string() + " holds '" + ck.kind + "', expected m2");
  M2Model m(models::arch_from_meta(ck.meta), ck.meta_size("classes"), 0, static_cast<float>(ck.meta_double("alpha")));
  nn::restore_store(ck, m.params());
  m.set_trained(ck.meta_value("trained") == "1");
  return m;
}

}  // namespace ssvae::ssl
