#include "ssvae/bench/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "ssvae/error.hpp"

namespace ssvae::bench {

namespace {

using Clock = std::chrono::steady_clock;

std::string fixed2(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  // -0.00 and 0.00 are the same value; keep the output canonical.
  if (std::string(buf) == "-0.00") return "0.00";
  return buf;
}

std::size_t method_rank(Method m) {
  return static_cast<std::size_t>(std::find(std::begin(kAllMethods), std::end(kAllMethods), m) - std::begin(kAllMethods));
}

std::vector<const CellResult*> sorted_cells(const ExperimentReport& report) {
  std::vector<const CellResult*> cells;
  for (const auto& c : report.cells) cells.push_back(&c);
  std::stable_sort(cells.begin(), cells.end(), [](const CellResult* a, const CellResult* b) {
    const std::string da = data::dataset_name(a->dataset), db = data::dataset_name(b->dataset);
    if (da != db) return da < db;
    if (a->method != b->method) return method_rank(a->method) < method_rank(b->method);
    return a->n_labels < b->n_labels;
  });
  return cells;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

std::size_t CellResult::completed() const {
  return static_cast<std::size_t>(std::count_if(rounds.begin(), rounds.end(), [](const auto& r) { return r.has_value(); }));
}

double CellResult::mean() const {
  const std::size_t n = completed();
  if (n == 0) return std::nan("");
  double s = 0.0;
  for (const auto& r : rounds) {
    if (r) s += *r;
  }
  return s / static_cast<double>(n);
}

double CellResult::stddev() const {
  const std::size_t n = completed();
  if (n == 0) return std::nan("");
  const double m = mean();
  double s = 0.0;
  for (const auto& r : rounds) {
    if (r) s += (*r - m) * (*r - m);
  }
  return std::sqrt(s / static_cast<double>(n));
}

const CellResult* ExperimentReport::find(Method method, std::size_t n_labels) const {
  for (const auto& c : cells) {
    if (c.method == method && c.n_labels == n_labels) return &c;
  }
  return nullptr;
}

data::TrainTest prepare_round(const data::DatasetSource& source, std::uint64_t seed, bool fixed_test) {
  data::TrainTest tt = data::draw_round(source, seed, fixed_test);
  tt.train = data::shuffle_split(tt.train, seed);
  return tt;
}

ExperimentReport run_sweep(const ExperimentConfig& config, const data::DatasetSource& source, std::ostream* log) {
  config.validate();
  const auto budgets = config.effective_budgets();
  ExperimentReport report;
  std::map<std::pair<Method, std::size_t>, std::size_t> index;
  for (Method m : config.methods) {
    for (std::size_t n : budgets) {
      index[{m, n}] = report.cells.size();
      CellResult c;
      c.dataset = config.dataset;
      c.method = m;
      c.n_labels = n;
      c.rounds.assign(static_cast<std::size_t>(config.rounds), std::nullopt);
      report.cells.push_back(std::move(c));
    }
  }

  for (int r = 0; r < config.rounds; ++r) {
    const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(r);
    const data::TrainTest tt = prepare_round(source, seed, config.fixed_test);
    const data::SegmentSet& train = tt.train;
    UnsupervisedCache cache(config, train.values, seed);
    std::vector<data::SemiSplit> splits;
    for (std::size_t n : budgets) {
      splits.push_back(data::label_budget(train, tt.test, std::min(n, train.size()), source.classes, source.policy, seed));
    }
    for (Method m : config.methods) {
      for (std::size_t b = 0; b < budgets.size(); ++b) {
        CellResult& cell = report.cells[index.at({m, budgets[b]})];
        const double fit_before = cache.fit_seconds(m);
        const auto t0 = Clock::now();
        try {
          if (budgets[b] > train.size()) {
            throw ConfigError("budget " + std::to_string(budgets[b]) + " exceeds the " +
                              std::to_string(train.size()) + " training windows");
          }
          AnyModel model = train_method(m, config, splits[b], source.classes, seed, cache);
          cell.rounds[r] = accuracy_percent(model, tt.test);
        } catch (const std::exception& e) {
          cell.errors.push_back("round " + std::to_string(r) + ": " + e.what());
          if (log) *log << "  failed: " << e.what() << '\n';
        }
        // The shared fit is charged to every cell that uses it.
        const double fit_after = cache.fit_seconds(m);
        cell.seconds += std::chrono::duration<double>(Clock::now() - t0).count() - (fit_after - fit_before) + fit_after;
        if (log) {
          *log << data::dataset_name(config.dataset) << ' ' << method_name(m) << " N=" << budgets[b]
               << " round " << r << ": " << (cell.rounds[r] ? fixed2(*cell.rounds[r]) + "%" : std::string("failed"))
               << '\n';
          log->flush();
        }
      }
    }
  }
  return report;
}

ExperimentReport run_sweep(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  return run_sweep(config, load_source(config), log);
}

std::string report_csv(const ExperimentReport& report, bool with_timing) {
  std::ostringstream out;
  out << "dataset,method,n_labels,acc_mean,acc_std,rounds,seconds\n";
  for (const CellResult* c : sorted_cells(report)) {
    out << data::dataset_name(c->dataset) << ',' << method_name(c->method) << ',' << c->n_labels << ','
        << fixed2(c->mean()) << ',' << fixed2(c->stddev()) << ',' << c->completed() << ','
        << fixed2(with_timing ? c->seconds : 0.0) << '\n';
  }
  return out.str();
}

std::string rounds_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "dataset,method,n_labels,round,accuracy\n";
  for (const CellResult* c : sorted_cells(report)) {
    for (std::size_t r = 0; r < c->rounds.size(); ++r) {
      out << data::dataset_name(c->dataset) << ',' << method_name(c->method) << ',' << c->n_labels << ',' << r << ','
          << (c->rounds[r] ? fixed2(*c->rounds[r]) : std::string("failed")) << '\n';
    }
  }
  return out.str();
}

std::filesystem::path rounds_path(const std::filesystem::path& report_path) {
  return report_path.parent_path() / (report_path.stem().string() + ".rounds.csv");
}

void write_report(const ExperimentReport& report, const std::filesystem::path& path, bool with_timing) {
  if (report.cells.empty()) throw ConfigError("cannot write an empty report");
  write_text(path, report_csv(report, with_timing));
  write_text(rounds_path(path), rounds_csv(report));
}

std::vector<ReportRow> parse_report(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "dataset,method,n_labels,acc_mean,acc_std,rounds,seconds") {
    throw DataError("report lacks the expected header");
  }
  std::vector<ReportRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 7) throw DataError("report line " + std::to_string(lineno) + " does not have 7 fields");
    ReportRow row;
    row.dataset = cells[0];
    row.method = cells[1];
    try {
      row.n_labels = std::stoull(cells[2]);
      row.acc_mean = std::stod(cells[3]);
      row.acc_std = std::stod(cells[4]);
      row.rounds = std::stoull(cells[5]);
      row.seconds = std::stod(cells[6]);
    } catch (const std::exception&) {
      throw DataError("report line " + std::to_string(lineno) + " has a malformed number");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ReportRow> read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open report " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

std::vector<double> dump_reconstructions(const AnyModel& model, const Tensor& segments,
                                         const std::filesystem::path& path) {
  if (segments.rank() != 2 || segments.dim(0) == 0) throw ConfigError("dump_reconstructions needs segments [N,D]");
  const Tensor rec = reconstruct(model, segments);
  const std::size_t n = segments.dim(0), d = segments.dim(1);
  std::ostringstream out;
  out.precision(9);
  out << "index,mse";
  for (std::size_t j = 0; j < d; ++j) out << ",x_" << j;
  for (std::size_t j = 0; j < d; ++j) out << ",r_" << j;
  out << '\n';
  std::vector<double> mse(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double e = segments.at(i, j) - rec.at(i, j);
      mse[i] += e * e / static_cast<double>(d);
    }
    out << i << ',' << mse[i];
    for (std::size_t j = 0; j < d; ++j) out << ',' << segments.at(i, j);
    for (std::size_t j = 0; j < d; ++j) out << ',' << rec.at(i, j);
    out << '\n';
  }
  write_text(path, out.str());
  return mse;
}

}  // namespace ssvae::bench
