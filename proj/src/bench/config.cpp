#include "ssvae/bench/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ssvae/error.hpp"

namespace ssvae::bench {

const char* method_name(Method method) noexcept {
  switch (method) {
    case Method::kPca: return "pca";
    case Method::kAe: return "ae";
    case Method::kCnn: return "cnn";
    case Method::kM1: return "m1";
    case Method::kM2: return "m2";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : kAllMethods) {
    if (name == method_name(m)) return m;
  }
  throw ConfigError("unknown method '" + name + "' (expected pca, ae, cnn, m1 or m2)");
}

namespace {

std::vector<std::string> split_list(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) throw ConfigError("setting '" + key + "': cannot parse '" + value + "'");
  if constexpr (std::is_unsigned_v<T>) {
    if (value.find('-') != std::string::npos) throw ConfigError("setting '" + key + "' must be non-negative");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError("setting '" + key + "': expected a boolean, got '" + value + "'");
}

}  // namespace

std::vector<Method> parse_methods(const std::string& list) {
  if (trim(list) == "all") return {std::begin(kAllMethods), std::end(kAllMethods)};
  std::vector<Method> out;
  for (const auto& item : split_list(list)) {
    const Method m = parse_method(item);
    if (std::find(out.begin(), out.end(), m) != out.end()) throw ConfigError("method '" + item + "' listed twice");
    out.push_back(m);
  }
  if (out.empty()) throw ConfigError("no methods given");
  return out;
}

std::vector<std::size_t> default_budgets(data::DatasetKind kind) {
  switch (kind) {
    case data::DatasetKind::kCwru: return {10, 50, 100, 300, 516, 860, 1075, 2150};
    case data::DatasetKind::kIms: return {10, 40, 100, 200, 400, 800, 1000, 2000, 4000, 8000};
    case data::DatasetKind::kSynth: return {40, 400};
  }
  return {};
}

std::vector<std::size_t> ExperimentConfig::effective_budgets() const {
  return budgets.empty() ? default_budgets(dataset) : budgets;
}

models::ArchConfig ExperimentConfig::arch() const {
  models::ArchConfig a;
  a.latent_dim = latent_dim;
  a.dropout = dropout;
  return a;
}

std::size_t ExperimentConfig::effective_pca_components() const {
  return pca_components == 0 ? latent_dim : pca_components;
}

void ExperimentConfig::validate() const {
  if (rounds < 1) throw ConfigError("rounds must be at least 1");
  if (methods.empty()) throw ConfigError("no methods selected");
  const auto b = effective_budgets();
  if (b.empty()) throw ConfigError("no label budgets given");
  for (std::size_t i = 1; i < b.size(); ++i) {
    if (b[i] <= b[i - 1]) throw ConfigError("budgets must be strictly increasing");
  }
  if (latent_dim == 0 || batch_size == 0 || epochs < 1 || mc_samples == 0) {
    throw ConfigError("latent_dim, batch_size, epochs and mc_samples must be positive");
  }
  if (!(lr > 0.0f) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(alpha_scale >= 0.0f)) throw ConfigError("alpha_scale must be non-negative");
  if (!(dropout >= 0.0f && dropout < 1.0f)) throw ConfigError("dropout must lie in [0, 1)");
  beta.validate();
  if (dataset != data::DatasetKind::kSynth && data_root.empty()) {
    throw ConfigError(std::string("dataset ") + data::dataset_name(dataset) +
                      " needs data_root (--data-root DIR); see README for the expected layout");
  }
  if (dataset == data::DatasetKind::kSynth) synth.validate();
  arch().validate();
}

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  std::string key = raw_key;
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string value = trim(raw_value);
  if (key == "dataset") c.dataset = data::parse_dataset_kind(value);
  else if (key == "data_root") c.data_root = value;
  else if (key == "methods") c.methods = parse_methods(value);
  else if (key == "budgets") {
    c.budgets.clear();
    for (const auto& item : split_list(value)) c.budgets.push_back(parse_number<std::size_t>(key, item));
  } else if (key == "rounds") c.rounds = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "fixed_test") c.fixed_test = parse_bool(key, value);
  else if (key == "record_timing") c.record_timing = parse_bool(key, value);
  else if (key == "latent_dim") c.latent_dim = parse_number<std::size_t>(key, value);
  else if (key == "batch_size") c.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "epochs") c.epochs = parse_number<int>(key, value);
  else if (key == "lr") c.lr = parse_number<float>(key, value);
  else if (key == "alpha_scale") c.alpha_scale = parse_number<float>(key, value);
  else if (key == "beta_start") c.beta.start = parse_number<float>(key, value);
  else if (key == "beta_end") c.beta.end = parse_number<float>(key, value);
  else if (key == "beta_warmup") c.beta.warmup_epochs = parse_number<int>(key, value);
  else if (key == "mc_samples") c.mc_samples = parse_number<std::size_t>(key, value);
  else if (key == "dropout") c.dropout = parse_number<float>(key, value);
  else if (key == "classifier") c.classifier = ssl::parse_linear_loss(value);
  else if (key == "pca_components") c.pca_components = parse_number<std::size_t>(key, value);
  else if (key == "ims_healthy") {
    if (value != "balanced" && value != "strict") throw ConfigError("ims_healthy must be balanced or strict");
    c.ims_strict_healthy = value == "strict";
  } else if (key == "synth_seed") c.synth_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "snr_db") {
    c.synth.snr_db = value == "inf" ? std::numeric_limits<double>::infinity() : parse_number<double>(key, value);
  } else if (key == "synth_train_recordings") c.synth.train_recordings_per_class = parse_number<std::size_t>(key, value);
  else if (key == "synth_test_recordings") c.synth.test_recordings_per_class = parse_number<std::size_t>(key, value);
  else throw ConfigError("unknown setting '" + raw_key + "'");
}

std::map<std::string, std::string> read_settings_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '-', '_');
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

void apply_settings(ExperimentConfig& config, const std::map<std::string, std::string>& settings) {
  // dataset first, so dataset-dependent parsing sees the final value.
  if (auto it = settings.find("dataset"); it != settings.end()) apply_setting(config, it->first, it->second);
  for (const auto& [k, v] : settings) {
    if (k != "dataset") apply_setting(config, k, v);
  }
}

data::DatasetSource load_source(const ExperimentConfig& config) {
  switch (config.dataset) {
    case data::DatasetKind::kCwru:
      if (config.data_root.empty()) throw ConfigError("dataset cwru needs --data-root DIR");
      return data::cwru_source(config.data_root);
    case data::DatasetKind::kIms:
      if (config.data_root.empty()) throw ConfigError("dataset ims needs --data-root DIR");
      return data::ims_source(config.data_root,
                              config.ims_strict_healthy ? data::ims_strict_healthy() : data::ImsProtocol{});
    case data::DatasetKind::kSynth:
      return config.data_root.empty() ? data::synth_source(config.synth, config.synth_seed)
                                      : data::synth_source(config.data_root, config.synth);
  }
  throw ConfigError("unknown dataset");
}

}  // namespace ssvae::bench
