#include "ssvae/ssl/m1.hpp"

#include "ssvae/error.hpp"
#include "ssvae/nn/checkpoint.hpp"

namespace ssvae::ssl {

Tensor m1_extract_features(const M1Model& model, const Tensor& x) {
  if (!model.vae.trained()) throw ConfigError("M1 features need a trained VAE (run fit_vae first)");
  return vae::posterior_means(model.vae, x);
}

LinearClassifier m1_train_classifier(const Tensor& features, std::span<const int> labels, std::size_t classes,
                                     const LinearClassifierConfig& config) {
  LinearClassifier c;
  c.fit(features, labels, classes, config);
  return c;
}

M1Model m1_fit(const vae::ArchConfig& arch, std::uint64_t init_seed, const Tensor& all_segments,
               const Tensor& labeled_segments, std::span<const int> labels, std::size_t classes,
               const vae::FitConfig& vae_config, const LinearClassifierConfig& classifier_config,
               vae::TrainingLog* log) {
  M1Model m{vae::VaeModel(arch, init_seed), {}};
  vae::TrainingLog l = vae::fit_vae(m.vae, all_segments, vae_config);
  if (log) *log = std::move(l);
  m.classifier = m1_train_classifier(m1_extract_features(m, labeled_segments), labels, classes, classifier_config);
  return m;
}

std::vector<int> predict(const M1Model& model, const Tensor& x) {
  if (!model.classifier.trained()) throw ConfigError("M1 classifier is untrained");
  return model.classifier.predict(m1_extract_features(model, x));
}

void save_m1(const M1Model& model, const std::filesystem::path& path) {
  nn::Checkpoint ck;
  ck.kind = "m1";
  models::arch_to_meta(model.vae.arch(), ck.meta);
  ck.meta["conditioning"] = "0";
  ck.meta["trained"] = model.vae.trained() ? "1" : "0";
  nn::append_store(ck, model.vae.params());
  model.classifier.append_to(ck, "svm");
  nn::save_checkpoint(path, ck);
}

M1Model load_m1(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  if (ck.kind != "m1") throw DataError("checkpoint " + path.string() + " holds '" + ck.kind + "', expected m1");
  M1Model m{vae::load_vae(path), LinearClassifier::from_checkpoint(ck, "svm")};
  return m;
}

}  // namespace ssvae::ssl
