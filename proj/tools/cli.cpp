#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "ssvae/bench/config.hpp"
#include "ssvae/bench/methods.hpp"
#include "ssvae/bench/sweep.hpp"
#include "ssvae/data/loaders.hpp"
#include "ssvae/data/split.hpp"
#include "ssvae/data/synth.hpp"
#include "ssvae/error.hpp"

namespace ssvae::cli {

namespace {

using bench::ExperimentConfig;

// Flags that map one-to-one onto ExperimentConfig settings. Values given on
// the command line are applied after the config file.
class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {}

  void add(const std::string& key, const std::string& help) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    options_.push_back({key, app_->add_option("--" + flag, values_[key], help)});
  }

  void add_common() {
    app_->add_option("--config", config_file_, "File of key = value settings ('#' comments)");
    app_->add_option("--set", extra_, "Any setting as KEY=VALUE (repeatable)");
    add("seed", "Base seed; round r uses seed + r");
    add("dataset", "cwru, ims or synth");
    add("data_root", "Dataset directory (required for cwru and ims)");
    add("latent_dim", "Latent size");
    add("batch_size", "Minibatch size");
    add("epochs", "Training epochs");
    add("lr", "RMSprop learning rate");
    add("alpha_scale", "M2 classification weight per labeled window");
    add("beta_start", "KL weight at epoch 0");
    add("beta_end", "KL weight after warm-up");
    add("beta_warmup", "Warm-up epochs for the KL weight");
    add("mc_samples", "Posterior samples per window");
    add("dropout", "Dropout rate");
    add("classifier", "Linear classifier loss for pca, ae and m1");
    add("ims_healthy", "balanced or strict");
    add("synth_seed", "Seed of the in-memory synthetic dataset");
    add("snr_db", "Synthetic noise level in dB (inf for none)");
  }

  ExperimentConfig build() const {
    ExperimentConfig config;
    std::map<std::string, std::string> settings;
    if (!config_file_.empty()) settings = bench::read_settings_file(config_file_);
    for (const auto& kv : extra_) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
      std::string key = kv.substr(0, eq);
      std::replace(key.begin(), key.end(), '-', '_');
      settings[key] = kv.substr(eq + 1);
    }
    for (const auto& [key, option] : options_) {
      if (option->count() > 0) settings[key] = values_.at(key);
    }
    bench::apply_settings(config, settings);
    return config;
  }

 private:
  CLI::App* app_;
  std::string config_file_;
  std::vector<std::string> extra_;
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
};

data::TrainTest round_data(const ExperimentConfig& config, int round, data::DatasetSource* source_out = nullptr) {
  if (round < 0) throw ConfigError("--round must be non-negative");
  data::DatasetSource source = bench::load_source(config);
  data::TrainTest tt = bench::prepare_round(source, config.seed + static_cast<std::uint64_t>(round), config.fixed_test);
  if (source_out) *source_out = std::move(source);
  return tt;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised bearing fault diagnosis with variational autoencoders", "ssvae"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  // train
  auto* train = app.add_subcommand("train", "Train one method on one label split and report test accuracy");
  Settings train_settings(train);
  train_settings.add_common();
  std::string train_method;
  std::size_t train_labels = 0;
  int train_round = 0;
  bool train_fixed = false;
  std::string train_out, train_manifest;
  train->add_option("--method", train_method, "pca, ae, cnn, m1 or m2")->required();
  train->add_option("--labels", train_labels, "Number of labeled training windows")->required();
  train->add_option("--round", train_round, "Round index (seed + round)");
  train->add_flag("--fixed-test", train_fixed, "Keep the test windows fixed across rounds");
  train->add_option("--out", train_out, "Checkpoint path");
  train->add_option("--manifest", train_manifest, "Write the split manifest CSV here");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a round's test set");
  Settings eval_settings(eval);
  eval_settings.add_common();
  std::string eval_model;
  int eval_round = 0;
  bool eval_fixed = false;
  eval->add_option("--model", eval_model, "Checkpoint path")->required();
  eval->add_option("--round", eval_round, "Round index (seed + round)");
  eval->add_flag("--fixed-test", eval_fixed, "Keep the test windows fixed across rounds");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run the label-budget sweep and write the report CSV");
  Settings sweep_settings(sweep);
  sweep_settings.add_common();
  sweep_settings.add("methods", "Comma-separated methods or 'all'");
  sweep_settings.add("budgets", "Comma-separated label budgets, strictly increasing");
  sweep_settings.add("rounds", "Rounds per cell");
  sweep_settings.add("pca_components", "PCA components (0 means latent dim)");
  bool sweep_fixed = false, sweep_no_timing = false, sweep_quiet = false;
  std::string sweep_out = "report.csv";
  sweep->add_flag("--fixed-test", sweep_fixed, "Keep the test windows fixed across rounds");
  sweep->add_flag("--no-timing", sweep_no_timing, "Write 0.00 in the seconds column");
  sweep->add_flag("--quiet", sweep_quiet, "No progress lines on stderr");
  sweep->add_option("--out", sweep_out, "Report path; the per-round file goes next to it")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Write the synthetic dataset to disk");
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  double synth_snr = data::SynthConfig{}.snr_db;
  std::size_t synth_train = data::SynthConfig{}.train_recordings_per_class;
  std::size_t synth_test = data::SynthConfig{}.test_recordings_per_class;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Generation seed (same data as synth_seed in memory)");
  synth->add_option("--snr-db", synth_snr, "Noise level in dB");
  synth->add_option("--train-recordings", synth_train, "Training recordings per class");
  synth->add_option("--test-recordings", synth_test, "Test recordings per class");

  // dump-recon
  auto* dump = app.add_subcommand("dump-recon", "Write originals and reconstructions of a checkpoint to CSV");
  Settings dump_settings(dump);
  dump_settings.add_common();
  std::string dump_model, dump_out, dump_split = "test";
  int dump_round = 0;
  std::size_t dump_count = 16;
  bool dump_fixed = false;
  dump->add_option("--model", dump_model, "Checkpoint of an ae, m1 or m2 model")->required();
  dump->add_option("--out", dump_out, "CSV path")->required();
  dump->add_option("--split", dump_split, "test or train")->check(CLI::IsMember({"test", "train"}));
  dump->add_option("--count", dump_count, "Number of windows (0 for all)");
  dump->add_option("--round", dump_round, "Round index (seed + round)");
  dump->add_flag("--fixed-test", dump_fixed, "Keep the test windows fixed across rounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train) {
      ExperimentConfig config = train_settings.build();
      if (train_fixed) config.fixed_test = true;
      config.methods = {bench::parse_method(train_method)};
      config.budgets = {train_labels};
      config.rounds = 1;
      config.validate();
      data::DatasetSource source;
      const data::TrainTest tt = round_data(config, train_round, &source);
      if (train_labels > tt.train.size()) {
        throw ConfigError("--labels " + std::to_string(train_labels) + " exceeds the " +
                          std::to_string(tt.train.size()) + " training windows");
      }
      const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(train_round);
      const data::SemiSplit split = data::label_budget(tt.train, tt.test, train_labels, source.classes, source.policy, seed);
      bench::UnsupervisedCache cache(config, tt.train.values, seed);
      const bench::AnyModel model = bench::train_method(config.methods[0], config, split, source.classes, seed, cache);
      out << data::dataset_name(config.dataset) << ' ' << train_method << " N=" << train_labels << " round " << train_round
          << ": accuracy " << percent(bench::accuracy_percent(model, tt.test)) << "%\n";
      if (!train_out.empty()) {
        bench::save_model(model, train_out);
        out << "checkpoint " << train_out << '\n';
      }
      if (!train_manifest.empty()) {
        data::write_manifest(split, train_manifest);
        out << "manifest " << train_manifest << '\n';
      }
    } else if (*eval) {
      ExperimentConfig config = eval_settings.build();
      if (eval_fixed) config.fixed_test = true;
      config.validate();
      const bench::AnyModel model = bench::load_model(eval_model);
      const data::TrainTest tt = round_data(config, eval_round);
      out << bench::method_name(bench::model_method(model)) << " on " << data::dataset_name(config.dataset) << " round "
          << eval_round << ": accuracy " << percent(bench::accuracy_percent(model, tt.test)) << "% over "
          << tt.test.size() << " windows\n";
    } else if (*sweep) {
      ExperimentConfig config = sweep_settings.build();
      if (sweep_fixed) config.fixed_test = true;
      if (sweep_no_timing) config.record_timing = false;
      config.validate();
      const bench::ExperimentReport report = bench::run_sweep(config, sweep_quiet ? nullptr : &err);
      bench::write_report(report, sweep_out, config.record_timing);
      std::size_t failed = 0;
      for (const auto& c : report.cells) failed += c.errors.size();
      out << "report " << sweep_out << "\nrounds " << bench::rounds_path(sweep_out).string() << '\n';
      if (failed > 0) out << failed << " cell rounds failed; see the rounds file\n";
    } else if (*synth) {
      data::SynthConfig cfg;
      cfg.snr_db = synth_snr;
      cfg.train_recordings_per_class = synth_train;
      cfg.test_recordings_per_class = synth_test;
      cfg.validate();
      const auto recordings = data::synth_dataset(cfg, synth_seed);
      data::write_dataset(recordings, synth_out);
      out << "wrote " << recordings.size() << " recordings to " << synth_out << '\n';
    } else if (*dump) {
      ExperimentConfig config = dump_settings.build();
      if (dump_fixed) config.fixed_test = true;
      config.validate();
      const bench::AnyModel model = bench::load_model(dump_model);
      const data::TrainTest tt = round_data(config, dump_round);
      const data::SegmentSet& set = dump_split == "test" ? tt.test : tt.train;
      const std::size_t n = dump_count == 0 ? set.size() : std::min(dump_count, set.size());
      std::vector<std::size_t> rows(n);
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
      const std::vector<double> mse = bench::dump_reconstructions(model, data::subset(set, rows).values, dump_out);
      double mean = 0.0;
      for (double v : mse) mean += v / static_cast<double>(mse.size());
      out << "wrote " << n << " reconstructions to " << dump_out << " (mean mse " << mean << ")\n";
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace ssvae::cli
