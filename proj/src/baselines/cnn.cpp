#include "ssvae/baselines/cnn.hpp"

#include <cmath>
#include <numeric>

#include "batches.hpp"
#include "ssvae/error.hpp"
#include "ssvae/nn/checkpoint.hpp"
#include "ssvae/nn/ops.hpp"
#include "ssvae/ssl/labels.hpp"

namespace ssvae::baselines {

using nn::Var;

CnnModel::CnnModel(models::ArchConfig arch, std::size_t classes, std::uint64_t init_seed)
    : arch_(std::move(arch)), store_(std::make_unique<nn::ParamStore>()) {
  arch_.validate();
  if (classes < 2) throw ConfigError("CNN needs at least 2 classes");
  RngStream init = RngStream(init_seed).split(3);
  net_ = models::ClassifierNet(*store_, "classifier", arch_, classes, init);
}

nn::Var cross_entropy(const nn::Var& logits, std::span<const int> labels) {
  return nn::scale(nn::mean_all(nn::pick(nn::log_softmax(logits), labels)), -1.0f);
}

namespace {

void save_model(const CnnModel& model, const std::filesystem::path& path) {
  nn::Checkpoint ck;
  ck.kind = "cnn";
  models::arch_to_meta(model.arch(), ck.meta);
  ck.meta["classes"] = std::to_string(model.classes());
  ck.meta["trained"] = model.trained() ? "1" : "0";
  nn::append_store(ck, model.params());
  nn::save_checkpoint(path, ck);
}

}  // namespace

CnnTrainingLog cnn_fit(CnnModel& model, const Tensor& labeled, std::span<const int> labels,
                       const TrainConfig& config) {
  config.validate();
  if (labeled.rank() != 2 || labeled.dim(1) != model.arch().input_dim || labeled.dim(0) == 0) {
    throw ConfigError("cnn_fit: expected labeled segments [N," + std::to_string(model.arch().input_dim) + "]");
  }
  if (labels.size() != labeled.dim(0)) throw ConfigError("cnn_fit: label count does not match the segments");
  ssl::require_all_classes(labels, model.classes(), "cnn_fit");

  RngStream root(config.seed);
  RngStream dropout = root.split(2);
  detail::BatchStream batches(labeled.dim(0), config.batch_size, root.split(1));
  const bool one_pass = config.steps_per_epoch == 0;
  const std::size_t steps = one_pass ? batches.steps_per_pass() : config.steps_per_epoch;
  nn::ParamStore& store = model.params();
  store.zero_grad();

  CnnTrainingLog log;
  std::vector<int> y;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const nn::StoreSnapshot snapshot = nn::take_snapshot(store);
    double sum = 0.0;
    std::size_t rows = 0;
    try {
      for (std::size_t step = 0; step < steps; ++step) {
        const auto idx = batches.next(one_pass);
        y.resize(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) y[i] = labels[idx[i]];
        Var logits = model.net().logits(nn::constant(gather_rows(labeled, idx)), {true, &dropout});
        nn::check_finite(logits, "classifier.logits");
        Var loss = cross_entropy(logits, y);
        if (!std::isfinite(loss.value()[0])) throw NumericError("non-finite CNN loss");
        nn::backward(loss);
        nn::rmsprop_step(store, config.optimizer);
        sum += static_cast<double>(loss.value()[0]) * static_cast<double>(idx.size());
        rows += idx.size();
      }
    } catch (const NumericError& e) {
      nn::restore_snapshot(store, snapshot);
      if (!config.divergence_checkpoint.empty()) save_model(model, config.divergence_checkpoint);
      throw TrainingDiverged("CNN training diverged in epoch " + std::to_string(epoch) + ": " + e.what(), epoch);
    }
    log.epoch_loss.push_back(sum / static_cast<double>(rows));
  }
  model.set_trained(true);
  return log;
}

Tensor cnn_probabilities(const CnnModel& model, const Tensor& x, std::size_t batch_size) {
  if (x.rank() != 2 || x.dim(1) != model.arch().input_dim) {
    throw ConfigError("cnn_probabilities: expected [N," + std::to_string(model.arch().input_dim) + "], got " +
                      shape_str(x.shape()));
  }
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  const std::size_t k = model.classes();
  Tensor out({x.dim(0), k});
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < x.dim(0); start += batch_size) {
    const std::size_t end = std::min(x.dim(0), start + batch_size);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Var p = nn::softmax(model.net().logits(nn::constant(gather_rows(x, idx)), {}));
    std::copy_n(p.value().data(), idx.size() * k, out.data() + start * k);
  }
  return out;
}

std::vector<int> predict(const CnnModel& model, const Tensor& x) {
  if (!model.trained()) throw ConfigError("CNN is untrained");
  return ssl::argmax_rows(cnn_probabilities(model, x).values(), model.classes());
}

void save_cnn(const CnnModel& model, const std::filesystem::path& path) { save_model(model, path); }

CnnModel load_cnn(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.kind != "cnn") throw DataError("checkpoint " + path.string() + " holds '" + ck.kind + "', expected cnn");
  CnnModel m(models::arch_from_meta(ck.meta), ck.meta_size("classes"));
  nn::restore_store(ck, m.params());
  m.set_trained(ck.meta_value("trained") == "1");
  return m;
}

}  // namespace ssvae::baselines
