#include "ssvae/data/dataset.hpp"

#include <algorithm>
#include <map>

#include "ssvae/error.hpp"
#include "ssvae/rng.hpp"

namespace ssvae::data {

const char* dataset_name(DatasetKind kind) noexcept {
  switch (kind) {
    case DatasetKind::kCwru: return "cwru";
    case DatasetKind::kIms: return "ims";
    case DatasetKind::kSynth: return "synth";
  }
  return "?";
}

DatasetKind parse_dataset_kind(const std::string& name) {
  if (name == "cwru") return DatasetKind::kCwru;
  if (name == "ims") return DatasetKind::kIms;
  if (name == "synth") return DatasetKind::kSynth;
  throw ConfigError("unknown dataset '" + name + "' (expected cwru, ims or synth)");
}

DatasetSource cwru_source(const std::filesystem::path& root, const CwruProtocol& protocol) {
  protocol.validate();
  DatasetSource s;
  s.kind = DatasetKind::kCwru;
  s.recordings = load_cwru(root);
  s.classes = kCwruClasses;
  s.policy = BudgetPolicy::kUniform;
  s.cwru = protocol;
  s.window = protocol.window;
  return s;
}

DatasetSource ims_source(const std::filesystem::path& root, const ImsProtocol& protocol) {
  DatasetSource s;
  s.kind = DatasetKind::kIms;
  s.recordings = load_ims(root, protocol);
  s.classes = kImsClasses;
  s.policy = BudgetPolicy::kFromEnd;
  s.ims = protocol;
  s.window = protocol.window;
  return s;
}

namespace {

DatasetSource synth_common(std::vector<Recording> recordings, const SynthConfig& config) {
  DatasetSource s;
  s.kind = DatasetKind::kSynth;
  s.recordings = std::move(recordings);
  s.classes = config.classes;
  s.policy = BudgetPolicy::kUniform;
  s.synth_test_recordings = config.test_recordings_per_class;
  return s;
}

}  // namespace

DatasetSource synth_source(const SynthConfig& config, std::uint64_t seed) {
  return synth_common(synth_dataset(config, seed), config);
}

DatasetSource synth_source(const std::filesystem::path& root, const SynthConfig& config) {
  auto recs = load_labeled_tree(root);
  for (const auto& r : recs) {
    if (r.class_label < 0 || static_cast<std::size_t>(r.class_label) >= config.classes) {
      throw DataError("synthetic recording " + r.source_id + " has label " + std::to_string(r.class_label) +
                      " outside [0, " + std::to_string(config.classes) + ")");
    }
  }
  return synth_common(std::move(recs), config);
}

namespace {

TrainTest synth_windows(const DatasetSource& s, std::uint64_t seed, bool fixed_test) {
  std::map<int, std::vector<const Recording*>> by_class;
  for (const auto& r : s.recordings) by_class[r.class_label].push_back(&r);
  const std::size_t stride = segment_stride(s.window, s.synth_sliding_ratio);
  RngStream rng(seed);
  std::vector<SegmentSet> train, test;
  for (auto& [label, recs] : by_class) {
    std::stable_sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->sequence < b->sequence; });
    if (recs.size() <= s.synth_test_recordings) {
      throw DataError("synthetic class " + std::to_string(label) + " has too few recordings for its test share");
    }
    std::vector<char> is_test(recs.size(), 0);
    if (fixed_test) {
      std::fill(is_test.end() - static_cast<std::ptrdiff_t>(s.synth_test_recordings), is_test.end(), 1);
    } else {
      const auto order = rng.split(static_cast<std::uint64_t>(label) + 1).permutation(recs.size());
      for (std::size_t i = 0; i < s.synth_test_recordings; ++i) is_test[order[i]] = 1;
    }
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const Recording& r = *recs[i];
      (is_test[i] ? test : train).push_back(segment_range(r, 0, r.samples.size(), s.window, stride));
    }
  }
  return {concat(train), concat(test)};
}

}  // namespace

TrainTest draw_round(const DatasetSource& source, std::uint64_t seed, bool fixed_test) {
  if (source.recordings.empty()) throw DataError("dataset has no recordings");
  TrainTest out;
  switch (source.kind) {
    case DatasetKind::kCwru:
      out = cwru_windows(source.recordings, source.cwru,
                         fixed_test ? std::nullopt : std::optional<std::uint64_t>(seed));
      break;
    case DatasetKind::kIms: out = ims_windows(source.recordings, source.ims); break;
    case DatasetKind::kSynth: out = synth_windows(source, seed, fixed_test); break;
  }
  znorm(out.train);
  znorm(out.test);
  return out;
}

}  // namespace ssvae::data
