#pragma once

// Experiment settings shared by the sweep runner and the command line.
//
// Every field can be set from a "key = value" line (see apply_setting); the
// same keys are accepted by the config file reader.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ssvae/data/dataset.hpp"
#include "ssvae/models/networks.hpp"
#include "ssvae/ssl/linear_classifier.hpp"
#include "ssvae/vae/train.hpp"

namespace ssvae::bench {

enum class Method { kPca, kAe, kCnn, kM1, kM2 };

inline constexpr Method kAllMethods[] = {Method::kPca, Method::kAe, Method::kCnn, Method::kM1, Method::kM2};

const char* method_name(Method method) noexcept;
Method parse_method(const std::string& name);
/// Comma-separated list, e.g. "m2,cnn"; "all" selects every method.
std::vector<Method> parse_methods(const std::string& list);

/// Standard label budgets for each dataset.
std::vector<std::size_t> default_budgets(data::DatasetKind kind);

struct ExperimentConfig {
  data::DatasetKind dataset = data::DatasetKind::kSynth;
  /// Required for cwru and ims; for synth an empty root generates the data
  /// in memory from synth_seed.
  std::filesystem::path data_root;
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  /// Empty means default_budgets(dataset).
  std::vector<std::size_t> budgets;
  int rounds = 10;
  std::uint64_t seed = 0;
  bool fixed_test = false;
  /// When false the report's seconds column is written as 0.00.
  bool record_timing = true;

  std::size_t latent_dim = 128;
  std::size_t batch_size = 200;
  int epochs = 10;
  float lr = 1e-4f;
  /// M2 alpha = alpha_scale * N.
  float alpha_scale = 0.1f;
  vae::BetaSchedule beta{};
  std::size_t mc_samples = 1;
  float dropout = 0.25f;
  ssl::LinearLoss classifier = ssl::LinearLoss::kLogistic;
  /// 0 means latent_dim.
  std::size_t pca_components = 0;

  bool ims_strict_healthy = false;
  data::SynthConfig synth{};
  std::uint64_t synth_seed = 0;

  std::vector<std::size_t> effective_budgets() const;
  models::ArchConfig arch() const;
  std::size_t effective_pca_components() const;
  /// rounds >= 1, budgets strictly increasing, methods non-empty and
  /// hyperparameters in range. Throws ConfigError.
  void validate() const;
};

/// Sets one field by key. Keys: dataset, data_root, methods, budgets, rounds,
/// seed, fixed_test, record_timing, latent_dim, batch_size, epochs, lr,
/// alpha_scale, beta_start, beta_end, beta_warmup, mc_samples, dropout,
/// classifier, pca_components, ims_healthy (balanced|strict), synth_seed,
/// snr_db, synth_train_recordings, synth_test_recordings. Throws ConfigError
/// for an unknown key or malformed value.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

/// "key = value" lines with '#' comments; keys may use '-' or '_'.
std::map<std::string, std::string> read_settings_file(const std::filesystem::path& path);
void apply_settings(ExperimentConfig& config, const std::map<std::string, std::string>& settings);

/// Loads the configured dataset (or generates the synthetic one).
data::DatasetSource load_source(const ExperimentConfig& config);

}  // namespace ssvae::bench
