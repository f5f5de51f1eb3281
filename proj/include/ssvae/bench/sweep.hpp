#pragma once

// Label-budget sweeps: every (method, N, round) cell is trained and scored on
// the round's test set, then aggregated into mean and population std.
//
// Report CSV:  dataset,method,n_labels,acc_mean,acc_std,rounds,seconds
// Rounds CSV:  dataset,method,n_labels,round,accuracy
//
// Accuracies are percentages with 2 decimals. `rounds` counts the rounds
// that finished; failed rounds appear as "failed" in the rounds file and a
// cell without any finished round reports nan. `seconds` is the total over
// rounds, including the shared unsupervised fit for pca, ae and m1.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssvae/bench/config.hpp"
#include "ssvae/bench/methods.hpp"

namespace ssvae::bench {

struct CellResult {
  data::DatasetKind dataset = data::DatasetKind::kSynth;
  Method method = Method::kPca;
  std::size_t n_labels = 0;
  /// Percent per round; nullopt where the round failed.
  std::vector<std::optional<double>> rounds;
  std::vector<std::string> errors;
  double seconds = 0.0;

  std::size_t completed() const;
  double mean() const;
  /// Population standard deviation of the completed rounds.
  double stddev() const;
};

struct ExperimentReport {
  std::vector<CellResult> cells;
  const CellResult* find(Method method, std::size_t n_labels) const;
};

/// The round's train/test windows with the training set shuffled by seed.
data::TrainTest prepare_round(const data::DatasetSource& source, std::uint64_t seed, bool fixed_test);

/// Round r uses seed base + r for the train/test draw, the shuffle, the
/// label budget and (through derive_seed) every model. Training failures are
/// recorded in the cell and the sweep continues. Progress lines go to `log`.
ExperimentReport run_sweep(const ExperimentConfig& config, const data::DatasetSource& source,
                           std::ostream* log = nullptr);
ExperimentReport run_sweep(const ExperimentConfig& config, std::ostream* log = nullptr);

/// Rows sorted by (dataset, method, N).
std::string report_csv(const ExperimentReport& report, bool with_timing = true);
std::string rounds_csv(const ExperimentReport& report);
/// <dir>/<stem>.rounds.csv next to a report path.
std::filesystem::path rounds_path(const std::filesystem::path& report_path);
/// Writes the report and its rounds file.
void write_report(const ExperimentReport& report, const std::filesystem::path& path, bool with_timing = true);

struct ReportRow {
  std::string dataset, method;
  std::size_t n_labels = 0;
  double acc_mean = 0.0, acc_std = 0.0;
  std::size_t rounds = 0;
  double seconds = 0.0;
};
std::vector<ReportRow> parse_report(const std::string& csv);
std::vector<ReportRow> read_report(const std::filesystem::path& path);

/// Rows: index,mse,x_0..x_{D-1},r_0..r_{D-1}. Returns the per-row MSE.
std::vector<double> dump_reconstructions(const AnyModel& model, const Tensor& segments,
                                         const std::filesystem::path& path);

}  // namespace ssvae::bench
