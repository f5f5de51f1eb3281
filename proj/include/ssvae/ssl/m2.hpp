#pragma once

// M2: classifier q(y|x), Gaussian encoder q(z|x) and conditional decoder
// p(x|y,z) with input concat(z, one_hot(y)), trained jointly on
//
//   J = sum_u U(x) + sum_l [ L(x,y) - alpha log q(y|x) ]
//   L(x,y) = -E_q(z|x)[log p(x|y,z)] - log p(y) + beta KL(q(z|x) || p(z))
//   U(x)   = sum_y q(y|x) L(x,y) - H(q(y|x))
//
// Every quantity here is a loss (lower is better). U sums over all K classes
// explicitly, decoding each sample once per class with shared z draws.

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "ssvae/models/networks.hpp"
#include "ssvae/vae/train.hpp"
#include "ssvae/vae/vae.hpp"

namespace ssvae::ssl {

using nn::ForwardContext;
using nn::Var;

/// Rows of pi(x) [B,K].
struct LabelPosterior {
  Tensor probs;
};

/// alpha = 0.1 * N for N labeled samples.
float m2_default_alpha(std::size_t labeled);

class M2Model {
 public:
  M2Model(models::ArchConfig arch, std::size_t classes, std::uint64_t init_seed = 0, float alpha = 0.0f);

  M2Model(M2Model&&) noexcept = default;
  M2Model& operator=(M2Model&&) noexcept = default;

  const vae::VaeModel& vae() const { return vae_; }
  vae::VaeModel& vae() { return vae_; }
  const models::ClassifierNet& classifier() const { return classifier_; }
  models::ClassifierNet& classifier() { return classifier_; }
  nn::ParamStore& params() { return vae_.params(); }
  const nn::ParamStore& params() const { return vae_.params(); }
  const models::ArchConfig& arch() const { return vae_.arch(); }

  std::size_t classes() const { return classes_; }
  float alpha() const { return alpha_; }
  void set_alpha(float alpha);
  /// Uniform label prior p(y) = 1/K.
  const std::vector<float>& prior() const { return prior_; }

  bool trained() const { return vae_.trained(); }
  void set_trained(bool trained) { vae_.set_trained(trained); }

 private:
  std::size_t classes_;
  float alpha_;
  std::vector<float> prior_;
  vae::VaeModel vae_;
  models::ClassifierNet classifier_;
};

/// Unnormalized classifier outputs [B,K].
Var m2_logits(const M2Model& model, const Var& x, const ForwardContext& ctx);

/// Eval-mode softmax of the classifier, batched.
LabelPosterior m2_classify(const M2Model& model, const Tensor& x, std::size_t batch_size = 200);

/// H(q) = -sum_k q_k log q_k per row of logits [B,K] -> [B].
Var categorical_entropy(const Var& logits);

/// Per-sample labeled terms [B]: l = L(x,y), cls = -alpha log q(y|x).
struct LabeledTerms {
  Var l;
  Var cls;
};
/// eps [L,B,latent] pins the z draws.
LabeledTerms m2_labeled_terms(const M2Model& model, const Var& x, std::span<const int> labels, float beta,
                              const Tensor& eps, const ForwardContext& ctx);

/// Per-sample unlabeled terms. l_per_class [B,K] holds L(x,k) for every class.
struct UnlabeledTerms {
  Var u;            // [B]
  Var l_per_class;  // [B,K]
  Var log_q;        // [B,K]
  Var entropy;      // [B]
};
UnlabeledTerms m2_unlabeled_terms(const M2Model& model, const Var& x, float beta, const Tensor& eps,
                                  const ForwardContext& ctx);

/// Batch means of each component; total = u + l + cls. Either batch may be
/// empty (0 rows), in which case its terms are 0.
struct SemiSupLosses {
  double l_labeled = 0.0;
  double u_unlabeled = 0.0;
  double cls_term = 0.0;
  double total = 0.0;
};

/// Differentiable mini-batch objective: mean_u U + mean_l (L + cls).
struct M2Objective {
  Var total;
  SemiSupLosses values;
};
M2Objective m2_objective(const M2Model& model, const Tensor& x_labeled, std::span<const int> labels,
                         const Tensor& eps_labeled, const Tensor& x_unlabeled, const Tensor& eps_unlabeled,
                         float beta, const ForwardContext& ctx);

/// Eval-mode batch means with L fresh draws.
SemiSupLosses m2_loss_labeled(const M2Model& model, const Tensor& x, std::span<const int> labels, RngStream& rng,
                              float beta = 1.0f, std::size_t samples = 1);
double m2_loss_unlabeled(const M2Model& model, const Tensor& x, RngStream& rng, float beta = 1.0f,
                         std::size_t samples = 1);

struct M2EpochLog;

struct M2FitConfig {
  std::size_t batch_size = 200;
  int epochs = 10;
  nn::RmsPropConfig optimizer{};
  vae::BetaSchedule beta{};
  /// When false beta stays at 1 for every epoch.
  bool anneal_beta = true;
  std::size_t mc_samples = 1;
  std::uint64_t seed = 0;
  std::filesystem::path divergence_checkpoint;
  /// Called after every completed epoch with the model in its current state.
  std::function<void(const M2EpochLog&)> on_epoch;

  void validate() const;
};

struct M2EpochLog {
  int epoch = 0;
  double beta = 0.0;
  SemiSupLosses losses;
};

struct M2TrainingLog {
  std::vector<M2EpochLog> epochs;
};

/// RMSprop on J. Each step takes one unlabeled batch (one pass over the
/// unlabeled set per epoch) and one labeled batch; labeled data are reshuffled
/// and recycled when exhausted. With no unlabeled data an epoch is one pass
/// over the labeled set. On divergence the parameters are rolled back to the
/// start of the failing epoch and TrainingDiverged is thrown.
M2TrainingLog m2_fit(M2Model& model, const Tensor& labeled, std::span<const int> labels, const Tensor& unlabeled,
                     const M2FitConfig& config);

/// CSV with header epoch,L_labeled,U_unlabeled,cls,total.
std::string m2_training_csv(const M2TrainingLog& log);

/// argmax of m2_classify (ties to the lowest class). Throws if untrained.
std::vector<int> predict(const M2Model& model, const Tensor& x);

/// Eval-mode decode(concat(mu(x), one_hot(y))) with y = argmax q(y|x).
Tensor m2_reconstruct(const M2Model& model, const Tensor& x, std::size_t batch_size = 200);

/// Checkpoint tagged "m2".
void save_m2(const M2Model& model, const std::filesystem::path& path);
M2Model load_m2(const std::filesystem::path& path);

}  // namespace ssvae::ssl
