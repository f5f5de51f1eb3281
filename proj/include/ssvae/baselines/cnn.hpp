#pragma once

// Supervised CNN with the topology of the M2 classifier, trained with
// cross-entropy on labeled segments only.

#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "ssvae/baselines/train_config.hpp"
#include "ssvae/models/networks.hpp"

namespace ssvae::baselines {

class CnnModel {
 public:
  CnnModel(models::ArchConfig arch, std::size_t classes, std::uint64_t init_seed = 0);

  CnnModel(CnnModel&&) noexcept = default;
  CnnModel& operator=(CnnModel&&) noexcept = default;

  const models::ArchConfig& arch() const { return arch_; }
  std::size_t classes() const { return net_.classes(); }
  nn::ParamStore& params() { return *store_; }
  const nn::ParamStore& params() const { return *store_; }
  const models::ClassifierNet& net() const { return net_; }

  bool trained() const { return trained_; }
  void set_trained(bool trained) { trained_ = trained; }

 private:
  models::ArchConfig arch_;
  std::unique_ptr<nn::ParamStore> store_;
  models::ClassifierNet net_;
  bool trained_ = false;
};

/// Mean of -log softmax(logits)[y] -> [1].
nn::Var cross_entropy(const nn::Var& logits, std::span<const int> labels);

struct CnnTrainingLog {
  std::vector<double> epoch_loss;
};

/// Requires every class among the labels (ConfigError lists the absent ones).
CnnTrainingLog cnn_fit(CnnModel& model, const Tensor& labeled, std::span<const int> labels,
                       const TrainConfig& config);

/// Eval-mode softmax probabilities [N,K].
Tensor cnn_probabilities(const CnnModel& model, const Tensor& x, std::size_t batch_size = 200);
std::vector<int> predict(const CnnModel& model, const Tensor& x);

/// Checkpoint tagged "cnn".
void save_cnn(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_cnn(const std::filesystem::path& path);

}  // namespace ssvae::baselines
