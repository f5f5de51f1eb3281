#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "ssvae/bench/config.hpp"
#include "ssvae/bench/methods.hpp"
#include "ssvae/bench/sweep.hpp"
#include "ssvae/error.hpp"

using namespace ssvae;
using namespace ssvae::bench;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.dataset = data::DatasetKind::kSynth;
  c.synth.train_recordings_per_class = 4;
  c.synth.test_recordings_per_class = 2;
  c.latent_dim = 8;
  c.epochs = 1;
  c.batch_size = 50;
  c.lr = 1e-3f;
  c.rounds = 1;
  c.budgets = {40};
  c.methods = {Method::kPca};
  c.synth_seed = 3;
  return c;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

int run_cli(std::vector<std::string> args, std::string* out_text = nullptr, std::string* err_text = nullptr) {
  args.insert(args.begin(), "ssvae");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text) *out_text = out.str();
  if (err_text) *err_text = err.str();
  return code;
}

}  // namespace

TEST_CASE("method lists parse, reject duplicates and unknown names") {
  CHECK(parse_methods("all").size() == 5);
  const auto m = parse_methods("m2, cnn");
  REQUIRE(m.size() == 2);
  CHECK(m[0] == Method::kM2);
  CHECK(m[1] == Method::kCnn);
  CHECK_THROWS_AS(parse_methods("m2,m2"), ConfigError);
  CHECK_THROWS_AS(parse_methods("m3"), ConfigError);
  CHECK_THROWS_AS(parse_methods(""), ConfigError);
  for (Method x : kAllMethods) CHECK(parse_method(method_name(x)) == x);
}

TEST_CASE("default budgets per dataset") {
  CHECK(default_budgets(data::DatasetKind::kCwru) == std::vector<std::size_t>{10, 50, 100, 300, 516, 860, 1075, 2150});
  CHECK(default_budgets(data::DatasetKind::kIms) ==
        std::vector<std::size_t>{10, 40, 100, 200, 400, 800, 1000, 2000, 4000, 8000});
  ExperimentConfig c;
  c.dataset = data::DatasetKind::kCwru;
  CHECK(c.effective_budgets() == default_budgets(data::DatasetKind::kCwru));
  c.budgets = {5, 7};
  CHECK(c.effective_budgets() == std::vector<std::size_t>{5, 7});
}

TEST_CASE("config validation") {
  ExperimentConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.rounds = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.budgets = {40, 40};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.budgets = {400, 40};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.lr = 0.0f;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.dataset = data::DatasetKind::kCwru;
  try {
    c.validate();
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("--data-root") != std::string::npos);
  }
}

TEST_CASE("settings by key, file and precedence") {
  ExperimentConfig c;
  apply_setting(c, "latent-dim", "16");
  apply_setting(c, "budgets", "10, 20,30");
  apply_setting(c, "fixed_test", "yes");
  apply_setting(c, "snr_db", "inf");
  apply_setting(c, "ims_healthy", "strict");
  CHECK(c.latent_dim == 16);
  CHECK(c.budgets == std::vector<std::size_t>{10, 20, 30});
  CHECK(c.fixed_test);
  CHECK(c.synth.noise_free());
  CHECK(c.ims_strict_healthy);
  CHECK_THROWS_AS(apply_setting(c, "no_such_key", "1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "rounds", "three"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "batch_size", "-4"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "fixed_test", "maybe"), ConfigError);

  const fs::path dir = testutil::fresh_dir("settings");
  {
    std::ofstream f(dir / "exp.cfg");
    f << "# comment line\n\ndataset = ims\nrounds = 4   # trailing\nbatch-size=32\n";
  }
  const auto s = read_settings_file(dir / "exp.cfg");
  CHECK(s.size() == 3);
  CHECK(s.at("batch_size") == "32");
  ExperimentConfig d;
  apply_settings(d, s);
  CHECK(d.dataset == data::DatasetKind::kIms);
  CHECK(d.rounds == 4);
  CHECK(d.batch_size == 32);
  {
    std::ofstream f(dir / "bad.cfg");
    f << "rounds 4\n";
  }
  CHECK_THROWS_AS(read_settings_file(dir / "bad.cfg"), ConfigError);
  CHECK_THROWS_AS(read_settings_file(dir / "missing.cfg"), ConfigError);
}

TEST_CASE("single round with a single method gives one row with zero std") {
  const ExperimentConfig c = small_config();
  const ExperimentReport r = run_sweep(c);
  REQUIRE(r.cells.size() == 1);
  CHECK(r.cells[0].completed() == 1);
  CHECK(r.cells[0].stddev() == 0.0);
  const auto lines = lines_of(report_csv(r));
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "dataset,method,n_labels,acc_mean,acc_std,rounds,seconds");
  CHECK(lines[1].rfind("synth,pca,40,", 0) == 0);
  const auto rows = parse_report(report_csv(r));
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].acc_std == 0.0);
  CHECK(rows[0].acc_mean >= 0.0);
  CHECK(rows[0].acc_mean <= 100.0);
}

TEST_CASE("sweeps are deterministic and round-trip through the CSV") {
  ExperimentConfig c = small_config();
  c.methods = {Method::kCnn, Method::kPca};
  c.budgets = {8, 40};
  c.rounds = 3;
  const ExperimentReport a = run_sweep(c);
  const ExperimentReport b = run_sweep(c);
  CHECK(report_csv(a, false) == report_csv(b, false));
  CHECK(rounds_csv(a) == rounds_csv(b));
  CHECK(report_csv(a, true) == report_csv(a, true));

  // Sorted by method rank then N, regardless of the configured order.
  const auto rows = parse_report(report_csv(a));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == "pca");
  CHECK(rows[0].n_labels == 8);
  CHECK(rows[1].n_labels == 40);
  CHECK(rows[2].method == "cnn");

  // Numeric fields survive a parse and re-format exactly.
  const auto lines = lines_of(report_csv(a));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string rebuilt = rows[i].dataset + "," + rows[i].method + "," + std::to_string(rows[i].n_labels) + "," +
                                fmt2(rows[i].acc_mean) + "," + fmt2(rows[i].acc_std) + "," +
                                std::to_string(rows[i].rounds) + "," + fmt2(rows[i].seconds);
    CHECK(rebuilt == lines[i + 1]);
    CHECK(rows[i].rounds == 3);
  }

  c.seed = 99;
  CHECK(rounds_csv(run_sweep(c)) != rounds_csv(a));
}

TEST_CASE("report std is the population std of the per-round sidecar") {
  ExperimentConfig c = small_config();
  c.rounds = 4;
  c.budgets = {8, 16, 40};
  const ExperimentReport r = run_sweep(c);
  const fs::path dir = testutil::fresh_dir("sidecar");
  write_report(r, dir / "report.csv", false);
  CHECK(fs::exists(dir / "report.rounds.csv"));

  std::map<std::size_t, std::vector<double>> per_n;
  const auto side = lines_of(read_file(dir / "report.rounds.csv"));
  REQUIRE(side.size() == 1 + 3 * 4);
  CHECK(side[0] == "dataset,method,n_labels,round,accuracy");
  for (std::size_t i = 1; i < side.size(); ++i) {
    std::istringstream in(side[i]);
    std::string ds, m, n, round, acc;
    std::getline(in, ds, ',');
    std::getline(in, m, ',');
    std::getline(in, n, ',');
    std::getline(in, round, ',');
    std::getline(in, acc, ',');
    per_n[std::stoul(n)].push_back(std::stod(acc));
  }
  const auto rows = read_report(dir / "report.csv");
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    const auto& v = per_n.at(row.n_labels);
    REQUIRE(v.size() == 4);
    double mean = 0.0;
    for (double x : v) mean += x / 4.0;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean) / 4.0;
    // The sidecar holds rounded values; the re-derived std agrees to the rounding.
    CHECK(std::abs(std::sqrt(var) - row.acc_std) <= 0.011);
    CHECK(std::abs(mean - row.acc_mean) <= 0.011);
    CHECK(row.seconds == 0.0);
  }
}

TEST_CASE("a failing cell is recorded and the sweep continues") {
  ExperimentConfig c = small_config();
  c.budgets = {40, 100000};
  const ExperimentReport r = run_sweep(c);
  const CellResult* ok = r.find(Method::kPca, 40);
  const CellResult* bad = r.find(Method::kPca, 100000);
  REQUIRE(ok);
  REQUIRE(bad);
  CHECK(ok->completed() == 1);
  CHECK(bad->completed() == 0);
  REQUIRE(bad->errors.size() == 1);
  CHECK(bad->errors[0].find("exceeds") != std::string::npos);
  const auto lines = lines_of(report_csv(r, false));
  REQUIRE(lines.size() == 3);
  CHECK(lines[2] == "synth,pca,100000,nan,nan,0,0.00");
  CHECK(lines_of(rounds_csv(r))[2] == "synth,pca,100000,0,failed");
}

TEST_CASE("report writing errors") {
  CHECK_THROWS_AS(write_report(ExperimentReport{}, testutil::fresh_dir("empty") / "r.csv"), ConfigError);
  const ExperimentReport r = run_sweep(small_config());
  const fs::path dir = testutil::fresh_dir("unwritable");
  { std::ofstream(dir / "file") << "x"; }
  CHECK_THROWS(write_report(r, dir / "file" / "r.csv"));
  CHECK_THROWS_AS(parse_report("wrong,header\n"), DataError);
  CHECK_THROWS_AS(parse_report("dataset,method,n_labels,acc_mean,acc_std,rounds,seconds\nsynth,pca,1,x,0,1,0\n"),
                  DataError);
}

TEST_CASE("reconstruction dumps") {
  ExperimentConfig c = small_config();
  const data::DatasetSource source = load_source(c);
  const data::TrainTest tt = prepare_round(source, 0, false);
  const std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const Tensor x = data::subset(tt.test, rows).values;
  double var = 0.0;
  for (float v : x.values()) var += static_cast<double>(v) * v / static_cast<double>(x.size());

  baselines::AeClassifier fresh{baselines::AeModel(c.arch(), 5), {}};
  fresh.ae.set_trained(true);
  const fs::path dir = testutil::fresh_dir("recon");
  const auto mse0 = dump_reconstructions(AnyModel(std::move(fresh)), x, dir / "untrained.csv");
  REQUIRE(mse0.size() == 10);
  double untrained = 0.0;
  for (double m : mse0) untrained += m / 10.0;
  CHECK(untrained > 0.5 * var);
  CHECK(untrained < 2.0 * var);

  const auto lines = lines_of(read_file(dir / "untrained.csv"));
  REQUIRE(lines.size() == 11);
  CHECK(lines[0].rfind("index,mse,x_0,", 0) == 0);
  CHECK(lines[0].find(",r_1023") != std::string::npos);

  c.epochs = 8;
  UnsupervisedCache cache(c, tt.train.values, 0);
  const data::SemiSplit split = data::label_budget(tt.train, tt.test, 40, source.classes, source.policy, 0);
  for (Method m : {Method::kAe, Method::kM1}) {
    const auto mse = dump_reconstructions(train_method(m, c, split, source.classes, 0, cache), x, dir / "trained.csv");
    double trained = 0.0;
    for (double v : mse) trained += v / 10.0;
    CHECK_MESSAGE(trained < untrained, method_name(m));
  }
  CHECK_THROWS_AS(dump_reconstructions(train_method(Method::kPca, c, split, source.classes, 0, cache), x,
                                       dir / "pca.csv"),
                  ConfigError);
  CHECK_FALSE(fs::exists(dir / "pca.csv"));
}

TEST_CASE("every method saves and loads through the common interface") {
  ExperimentConfig c = small_config();
  const data::DatasetSource source = load_source(c);
  const data::TrainTest tt = prepare_round(source, 1, false);
  UnsupervisedCache cache(c, tt.train.values, 1);
  const data::SemiSplit split = data::label_budget(tt.train, tt.test, 40, source.classes, source.policy, 1);
  const fs::path dir = testutil::fresh_dir("anymodel");
  for (Method m : kAllMethods) {
    CAPTURE(method_name(m));
    const AnyModel model = train_method(m, c, split, source.classes, 1, cache);
    CHECK(model_method(model) == m);
    const fs::path p = dir / (std::string(method_name(m)) + ".ckpt");
    save_model(model, p);
    const AnyModel back = load_model(p);
    CHECK(model_method(back) == m);
    CHECK(predict(back, tt.test.values) == predict(model, tt.test.values));
  }
}

TEST_CASE("derived seeds differ by method and purpose") {
  CHECK(derive_seed(1, Method::kM2, 1) != derive_seed(1, Method::kM2, 2));
  CHECK(derive_seed(1, Method::kM2, 1) != derive_seed(1, Method::kCnn, 1));
  CHECK(derive_seed(1, Method::kM2, 1) != derive_seed(2, Method::kM2, 1));
  CHECK(derive_seed(1, Method::kM2, 1) == derive_seed(1, Method::kM2, 1));
}

TEST_CASE("command line: usage, errors and a small end-to-end run") {
  std::string out, err;
  CHECK(run_cli({"sweep", "--bogus"}, &out, &err) != 0);
  CHECK((out + err).find("Usage") != std::string::npos);
  CHECK(run_cli({}, &out, &err) != 0);

  CHECK(run_cli({"train", "--method", "m2", "--labels", "516", "--dataset", "cwru"}, &out, &err) == 2);
  CHECK(err.find("--data-root") != std::string::npos);
  CHECK(run_cli({"train", "--method", "m2", "--labels", "516", "--dataset", "cwru", "--data-root", "/nonexistent/cwru"},
            &out, &err) == 3);
  CHECK(err.find("/nonexistent/cwru") != std::string::npos);
  CHECK(run_cli({"train", "--method", "m9", "--labels", "5"}, &out, &err) == 2);

  const fs::path dir = testutil::fresh_dir("cli");
  REQUIRE(run_cli({"synth", "--out", (dir / "synth").string(), "--seed", "3", "--train-recordings", "4",
               "--test-recordings", "2"},
              &out, &err) == 0);
  CHECK(out.find("24 recordings") != std::string::npos);

  {
    std::ofstream f(dir / "exp.cfg");
    f << "dataset = synth\nlatent_dim = 8\nepochs = 1\nbatch_size = 50\nrounds = 3\nsynth_test_recordings = 2\n";
  }
  const std::vector<std::string> common{"--config", (dir / "exp.cfg").string(), "--data-root",
                                        (dir / "synth").string(), "--seed", "7"};
  auto with = [&](std::vector<std::string> head) {
    head.insert(head.end(), common.begin(), common.end());
    return head;
  };
  REQUIRE(run_cli(with({"sweep", "--methods", "pca", "--budgets", "8,40", "--rounds", "2", "--no-timing", "--quiet",
                    "--out", (dir / "a.csv").string()}),
              &out, &err) == 0);
  const auto rows = read_report(dir / "a.csv");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].rounds == 2);
  CHECK(fs::exists(dir / "a.rounds.csv"));

  // The on-disk synthetic set is the one generated in memory from the same seed.
  ExperimentConfig mem = small_config();
  mem.rounds = 2;
  mem.budgets = {8, 40};
  mem.seed = 7;
  mem.record_timing = false;
  CHECK(report_csv(run_sweep(mem), false) == read_file(dir / "a.csv"));

  REQUIRE(run_cli(with({"train", "--method", "m1", "--labels", "40", "--out", (dir / "m1.ckpt").string(), "--manifest",
                    (dir / "split.csv").string()}),
              &out, &err) == 0);
  CHECK(out.find("accuracy") != std::string::npos);
  CHECK(data::read_manifest(dir / "split.csv").size() == 480);
  REQUIRE(run_cli(with({"eval", "--model", (dir / "m1.ckpt").string()}), &out, &err) == 0);
  CHECK(out.find("accuracy") != std::string::npos);
  REQUIRE(run_cli(with({"dump-recon", "--model", (dir / "m1.ckpt").string(), "--count", "5", "--out",
                    (dir / "recon.csv").string()}),
              &out, &err) == 0);
  CHECK(lines_of(read_file(dir / "recon.csv")).size() == 6);

  REQUIRE(run_cli(with({"train", "--method", "pca", "--labels", "40", "--out", (dir / "pca.ckpt").string()}), &out,
              &err) == 0);
  CHECK(run_cli(with({"dump-recon", "--model", (dir / "pca.ckpt").string(), "--out", (dir / "p.csv").string()}), &out,
            &err) == 2);
  CHECK(run_cli(with({"eval", "--model", (dir / "missing.ckpt").string()}), &out, &err) == 3);
}
