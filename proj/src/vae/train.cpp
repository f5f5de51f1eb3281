#include "ssvae/vae/train.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ssvae/error.hpp"
#include "ssvae/nn/ops.hpp"

namespace ssvae::vae {

float BetaSchedule::at(int epoch) const {
  if (warmup_epochs <= 0 || epoch >= warmup_epochs) return end;
  if (epoch <= 0) return start;
  return start + (end - start) * static_cast<float>(epoch) / static_cast<float>(warmup_epochs);
}

void BetaSchedule::validate() const {
  if (start < 0.0f || end > 1.0f || start > end) throw ConfigError("beta schedule needs 0 <= start <= end <= 1");
  if (warmup_epochs < 0) throw ConfigError("beta warmup epochs must be >= 0");
}

void FitConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (mc_samples == 0) throw ConfigError("need at least one Monte Carlo sample");
  if (optimizer.lr <= 0.0f) throw ConfigError("learning rate must be positive");
  beta.validate();
}

TrainingLog fit_vae(VaeModel& model, const Tensor& segments, const FitConfig& config) {
  config.validate();
  if (model.conditioning_dim() != 0) throw ConfigError("fit_vae trains unconditioned models only");
  if (segments.rank() != 2 || segments.dim(1) != model.input_dim()) {
    throw ConfigError("fit_vae: expected segments [N," + std::to_string(model.input_dim()) + "], got " +
                      shape_str(segments.shape()));
  }
  const std::size_t n = segments.dim(0);
  RngStream root(config.seed);
  RngStream order = root.split(1), dropout = root.split(2), noise = root.split(3);
  nn::ParamStore& store = model.params();
  store.zero_grad();

  TrainingLog log;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const nn::StoreSnapshot snapshot = nn::take_snapshot(store);
    const float beta = config.beta.at(epoch);
    const auto perm = order.permutation(n);
    EpochLog row;
    row.epoch = epoch;
    row.beta = beta;
    try {
      for (std::size_t start = 0; start < n; start += config.batch_size) {
        const std::size_t end = std::min(n, start + config.batch_size);
        std::span<const std::size_t> idx(perm.data() + start, end - start);
        Tensor batch = gather_rows(segments, idx);
        ForwardContext ctx{true, &dropout};
        ElboTerms t = elbo(model, nn::constant(std::move(batch)), beta, noise, config.mc_samples, ctx);
        Var loss = nn::scale(t.value, -1.0f);
        if (!std::isfinite(loss.value()[0])) throw NumericError("non-finite VAE loss");
        nn::backward(loss);
        nn::rmsprop_step(store, config.optimizer);
        const double w = static_cast<double>(end - start) / static_cast<double>(n);
        row.recon += w * t.recon_value();
        row.kl += w * t.kl_value();
        row.elbo += w * t.elbo_value();
      }
    } catch (const NumericError& e) {
      nn::restore_snapshot(store, snapshot);
      if (!config.divergence_checkpoint.empty()) save_vae(model, config.divergence_checkpoint);
      throw TrainingDiverged("VAE training diverged in epoch " + std::to_string(epoch) + ": " + e.what(), epoch);
    }
    log.epochs.push_back(row);
    if (epoch >= config.beta.warmup_epochs && row.kl < config.kl_floor && log.kl_vanished_epoch < 0) {
      log.kl_vanished_epoch = epoch;
    }
  }
  model.set_trained(true);
  return log;
}

std::string training_csv(const TrainingLog& log) {
  std::ostringstream out;
  out.precision(9);
  out << "epoch,recon,kl,beta,elbo\n";
  for (const auto& e : log.epochs) out << e.epoch << ',' << e.recon << ',' << e.kl << ',' << e.beta << ',' << e.elbo << '\n';
  return out.str();
}

void write_training_csv(const TrainingLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write training log " + path.string());
  out << training_csv(log);
}

}  // namespace ssvae::vae
