#include "ssvae/bench/methods.hpp"

#include <chrono>

#include "ssvae/error.hpp"
#include "ssvae/nn/checkpoint.hpp"
#include "ssvae/rng.hpp"
#include "ssvae/ssl/labels.hpp"

namespace ssvae::bench {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::size_t method_index(Method m) {
  for (std::size_t i = 0; i < std::size(kAllMethods); ++i) {
    if (kAllMethods[i] == m) return i;
  }
  return 0;
}

baselines::TrainConfig train_config(const ExperimentConfig& c, std::uint64_t seed) {
  baselines::TrainConfig t;
  t.batch_size = c.batch_size;
  t.epochs = c.epochs;
  t.optimizer.lr = c.lr;
  t.seed = seed;
  return t;
}

}  // namespace

Method model_method(const AnyModel& model) noexcept { return kAllMethods[model.index()]; }

std::uint64_t derive_seed(std::uint64_t round_seed, Method method, std::uint64_t purpose) {
  return RngStream(round_seed).split(16 * (method_index(method) + 1) + purpose).next_u64();
}

UnsupervisedCache::UnsupervisedCache(const ExperimentConfig& config, Tensor train_all, std::uint64_t round_seed)
    : config_(&config), train_(std::move(train_all)), round_seed_(round_seed) {
  if (train_.rank() != 2 || train_.dim(0) == 0) throw ConfigError("no training windows for the unsupervised models");
}

const baselines::PcaModel& UnsupervisedCache::pca() {
  if (!pca_) {
    const auto t0 = Clock::now();
    pca_ = baselines::pca_fit(train_, config_->effective_pca_components());
    pca_seconds_ = since(t0);
  }
  return *pca_;
}

const baselines::AeModel& UnsupervisedCache::ae() {
  if (!ae_) {
    const auto t0 = Clock::now();
    auto model =
        std::make_unique<baselines::AeModel>(config_->arch(), derive_seed(round_seed_, Method::kAe, 1));
    baselines::ae_fit(*model, train_, train_config(*config_, derive_seed(round_seed_, Method::kAe, 2)));
    ae_ = std::move(model);
    ae_seconds_ = since(t0);
  }
  return *ae_;
}

const vae::VaeModel& UnsupervisedCache::vae() {
  if (!vae_) {
    const auto t0 = Clock::now();
    auto model = std::make_unique<vae::VaeModel>(config_->arch(), derive_seed(round_seed_, Method::kM1, 1));
    vae::FitConfig f;
    f.batch_size = config_->batch_size;
    f.epochs = config_->epochs;
    f.optimizer.lr = config_->lr;
    f.beta = config_->beta;
    f.mc_samples = config_->mc_samples;
    f.seed = derive_seed(round_seed_, Method::kM1, 2);
    vae::fit_vae(*model, train_, f);
    vae_ = std::move(model);
    vae_seconds_ = since(t0);
  }
  return *vae_;
}

double UnsupervisedCache::fit_seconds(Method method) const {
  switch (method) {
    case Method::kPca: return pca_seconds_;
    case Method::kAe: return ae_seconds_;
    case Method::kM1: return vae_seconds_;
    default: return 0.0;
  }
}

AnyModel train_method(Method method, const ExperimentConfig& config, const data::SemiSplit& split,
                      std::size_t classes, std::uint64_t round_seed, UnsupervisedCache& cache) {
  const data::SegmentSet& lab = split.labeled;
  if (lab.empty()) throw ConfigError("no labeled windows");
  const ssl::LinearClassifierConfig lin{config.classifier};
  switch (method) {
    case Method::kPca: {
      baselines::PcaClassifier m{cache.pca(), {}};
      m.classifier.fit(baselines::pca_transform(m.pca, lab.values), lab.labels, classes, lin);
      return m;
    }
    case Method::kAe: {
      baselines::AeModel ae(config.arch());
      ae.params().copy_values_from(cache.ae().params());
      ae.set_trained(true);
      baselines::AeClassifier m{std::move(ae), {}};
      m.classifier.fit(baselines::ae_codes(m.ae, lab.values), lab.labels, classes, lin);
      return m;
    }
    case Method::kCnn: {
      baselines::CnnModel m(config.arch(), classes, derive_seed(round_seed, method, 1));
      baselines::cnn_fit(m, lab.values, lab.labels, train_config(config, derive_seed(round_seed, method, 2)));
      return m;
    }
    case Method::kM1: {
      vae::VaeModel v(config.arch());
      v.params().copy_values_from(cache.vae().params());
      v.set_trained(true);
      ssl::M1Model m{std::move(v), {}};
      m.classifier = ssl::m1_train_classifier(ssl::m1_extract_features(m, lab.values), lab.labels, classes, lin);
      return m;
    }
    case Method::kM2: {
      ssl::M2Model m(config.arch(), classes, derive_seed(round_seed, method, 1),
                     config.alpha_scale * static_cast<float>(lab.size()));
      ssl::M2FitConfig f;
      f.batch_size = config.batch_size;
      f.epochs = config.epochs;
      f.optimizer.lr = config.lr;
      f.beta = config.beta;
      f.mc_samples = config.mc_samples;
      f.seed = derive_seed(round_seed, method, 2);
      ssl::m2_fit(m, lab.values, lab.labels, split.unlabeled.values, f);
      return m;
    }
  }
  throw ConfigError("unknown method");
}

std::vector<int> predict(const AnyModel& model, const Tensor& x) {
  return std::visit(
      [&](const auto& m) -> std::vector<int> {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ssl::M1Model>) return ssl::predict(m, x);
        else if constexpr (std::is_same_v<std::decay_t<decltype(m)>, ssl::M2Model>) return ssl::predict(m, x);
        else return baselines::predict(m, x);
      },
      model);
}

double accuracy_percent(const AnyModel& model, const data::SegmentSet& test) {
  if (test.empty()) throw ConfigError("empty test set");
  return 100.0 * ssl::accuracy(predict(model, test.values), test.labels);
}

void save_model(const AnyModel& model, const std::filesystem::path& path) {
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, baselines::PcaClassifier>) baselines::save_pca(m, path);
        else if constexpr (std::is_same_v<T, baselines::AeClassifier>) baselines::save_ae(m, path);
        else if constexpr (std::is_same_v<T, baselines::CnnModel>) baselines::save_cnn(m, path);
        else if constexpr (std::is_same_v<T, ssl::M1Model>) ssl::save_m1(m, path);
        else ssl::save_m2(m, path);
      },
      model);
}

AnyModel load_model(const std::filesystem::path& path) {
  const std::string kind = nn::load_checkpoint(path).kind;
  if (kind == "pca") return baselines::load_pca(path);
  if (kind == "ae") return baselines::load_ae(path);
  if (kind == "cnn") return baselines::load_cnn(path);
  if (kind == "m1") return ssl::load_m1(path);
  if (kind == "m2") return ssl::load_m2(path);
  throw DataError("checkpoint " + path.string() + " holds '" + kind + "', not a classifier");
}

Tensor reconstruct(const AnyModel& model, const Tensor& x) {
  switch (model_method(model)) {
    case Method::kAe: return baselines::ae_reconstruct(std::get<baselines::AeClassifier>(model).ae, x);
    case Method::kM1: return vae::reconstruct(std::get<ssl::M1Model>(model).vae, x, false);
    case Method::kM2: return ssl::m2_reconstruct(std::get<ssl::M2Model>(model), x);
    default:
      throw ConfigError(std::string("method ") + method_name(model_method(model)) +
                        " has no decoder to reconstruct with");
  }
}

}  // namespace ssvae::bench
