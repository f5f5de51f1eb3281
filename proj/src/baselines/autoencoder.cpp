#include "ssvae/baselines/autoencoder.hpp"

#include <cmath>
#include <numeric>

#include "batches.hpp"
#include "ssvae/error.hpp"
#include "ssvae/nn/checkpoint.hpp"
#include "ssvae/nn/ops.hpp"

namespace ssvae::baselines {

AeModel::AeModel(ArchConfig arch, std::uint64_t init_seed)
    : arch_(std::move(arch)), store_(std::make_unique<nn::ParamStore>()) {
  arch_.validate();
  RngStream init(init_seed);
  RngStream enc_init = init.split(1), dec_init = init.split(2);
  encoder_ = models::Encoder(*store_, "encoder", arch_, arch_.latent_dim, enc_init);
  decoder_ = models::Decoder(*store_, "decoder", arch_, arch_.latent_dim, dec_init);
}

Var AeModel::encode(const Var& x, const ForwardContext& ctx) const {
  Var code = encoder_.forward(x, ctx);
  nn::check_finite(code, "encoder.code");
  return code;
}

Var AeModel::decode(const Var& code) const {
  Var x_hat = decoder_.forward(code);
  nn::check_finite(x_hat, "decoder.output");
  return x_hat;
}

Var mse(const Var& x, const Var& x_hat) {
  if (x.shape() != x_hat.shape()) {
    throw ConfigError("mse: shapes " + shape_str(x.shape()) + " and " + shape_str(x_hat.shape()) + " differ");
  }
  Var d = nn::sub(x, x_hat);
  return nn::mean_all(nn::mul(d, d));
}

namespace {

void expect_segments(const AeModel& model, const Tensor& x, const char* who) {
  if (x.rank() != 2 || x.dim(1) != model.arch().input_dim || x.dim(0) == 0) {
    throw ConfigError(std::string(who) + ": expected segments [N," + std::to_string(model.arch().input_dim) +
                      "], got " + shape_str(x.shape()));
  }
}

template <typename Fn>
Tensor batched(const Tensor& x, std::size_t width, std::size_t batch_size, Fn&& fn) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  Tensor out({x.dim(0), width});
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.dim(0); start += batch_size) {
    const std::size_t end = std::min(x.dim(0), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Var v = fn(nn::constant(gather_rows(x, idx)));
    std::copy_n(v.value().data(), idx.size() * width, out.data() + start * width);
  }
  return out;
}

void save_ae_parts(const AeModel& ae, const ssl::LinearClassifier& classifier, const std::filesystem::path& path) {
  nn::Checkpoint ck;
  ck.kind = "ae";
  models::arch_to_meta(ae.arch(), ck.meta);
  ck.meta["trained"] = ae.trained() ? "1" : "0";
  nn::append_store(ck, ae.params());
  if (classifier.trained()) classifier.append_to(ck, "svm");
  nn::save_checkpoint(path, ck);
}

}  // namespace

AeTrainingLog ae_fit(AeModel& model, const Tensor& segments, const TrainConfig& config) {
  config.validate();
  expect_segments(model, segments, "ae_fit");
  RngStream root(config.seed);
  RngStream dropout = root.split(2);
  detail::BatchStream batches(segments.dim(0), config.batch_size, root.split(1));
  const bool one_pass = config.steps_per_epoch == 0;
  const std::size_t steps = one_pass ? batches.steps_per_pass() : config.steps_per_epoch;
  nn::ParamStore& store = model.params();
  store.zero_grad();

  AeTrainingLog log;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const nn::StoreSnapshot snapshot = nn::take_snapshot(store);
    double sum = 0.0;
    std::size_t rows = 0;
    try {
      for (std::size_t step = 0; step < steps; ++step) {
        const auto idx = batches.next(one_pass);
        Var x = nn::constant(gather_rows(segments, idx));
        Var loss = mse(x, model.decode(model.encode(x, {true, &dropout})));
        if (!std::isfinite(loss.value()[0])) throw NumericError("non-finite autoencoder loss");
        nn::backward(loss);
        nn::rmsprop_step(store, config.optimizer);
        sum += static_cast<double>(loss.value()[0]) * static_cast<double>(idx.size());
        rows += idx.size();
      }
    } catch (const NumericError& e) {
      nn::restore_snapshot(store, snapshot);
      if (!config.divergence_checkpoint.empty()) save_ae_parts(model, {}, config.divergence_checkpoint);
      throw TrainingDiverged("autoencoder training diverged in epoch " + std::to_string(epoch) + ": " + e.what(),
                             epoch);
    }
    log.epoch_mse.push_back(sum / static_cast<double>(rows));
  }
  model.set_trained(true);
  return log;
}

Tensor ae_codes(const AeModel& model, const Tensor& x, std::size_t batch_size) {
  expect_segments(model, x, "ae_codes");
  return batched(x, model.code_dim(), batch_size, [&](const Var& b) { return model.encode(b, {}); });
}

Tensor ae_reconstruct(const AeModel& model, const Tensor& x, std::size_t batch_size) {
  expect_segments(model, x, "ae_reconstruct");
  return batched(x, model.arch().input_dim, batch_size,
                 [&](const Var& b) { return model.decode(model.encode(b, {})); });
}

AeClassifier ae_fit_classifier(const ArchConfig& arch, std::uint64_t init_seed, const Tensor& all_segments,
                               const Tensor& labeled_segments, std::span<const int> labels, std::size_t classes,
                               const TrainConfig& config, const ssl::LinearClassifierConfig& classifier_config,
                               AeTrainingLog* log) {
  AeClassifier m{AeModel(arch, init_seed), {}};
  AeTrainingLog l = ae_fit(m.ae, all_segments, config);
  if (log) *log = std::move(l);
  m.classifier.fit(ae_codes(m.ae, labeled_segments), labels, classes, classifier_config);
  return m;
}

std::vector<int> predict(const AeClassifier& model, const Tensor& x) {
  if (!model.ae.trained() || !model.classifier.trained()) throw ConfigError("autoencoder classifier is untrained");
  return model.classifier.predict(ae_codes(model.ae, x));
}

void save_ae(const AeClassifier& model, const std::filesystem::path& path) {
  save_ae_parts(model.ae, model.classifier, path);
}

AeClassifier load_ae(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.kind != "ae") throw DataError("checkpoint " + path.string() + " holds '" + ck.kind + "', expected ae");
  AeClassifier m{AeModel(models::arch_from_meta(ck.meta)), {}};
  nn::restore_store(ck, m.ae.params());
  m.ae.set_trained(ck.meta_value("trained") == "1");
  if (ck.meta.count("svm.loss")) m.classifier = ssl::LinearClassifier::from_checkpoint(ck, "svm");
  return m;
}

}  // namespace ssvae::baselines
