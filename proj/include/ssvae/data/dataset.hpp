#pragma once

// A dataset ready for experiments: recordings plus the protocol that turns
// them into z-normalized train and test windows for one round.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssvae/data/loaders.hpp"
#include "ssvae/data/split.hpp"
#include "ssvae/data/synth.hpp"

namespace ssvae::data {

enum class DatasetKind { kCwru, kIms, kSynth };

const char* dataset_name(DatasetKind kind) noexcept;
DatasetKind parse_dataset_kind(const std::string& name);

struct DatasetSource {
  DatasetKind kind = DatasetKind::kSynth;
  std::vector<Recording> recordings;
  std::size_t classes = 0;
  BudgetPolicy policy = BudgetPolicy::kUniform;
  CwruProtocol cwru{};
  ImsProtocol ims{};
  std::size_t synth_test_recordings = 10;
  std::size_t window = kDefaultWindow;
  double synth_sliding_ratio = kDefaultSlidingRatio;
};

DatasetSource cwru_source(const std::filesystem::path& root, const CwruProtocol& protocol = {});
DatasetSource ims_source(const std::filesystem::path& root, const ImsProtocol& protocol = {});
DatasetSource synth_source(const SynthConfig& config, std::uint64_t seed);
/// A synthetic dataset previously written with write_dataset.
DatasetSource synth_source(const std::filesystem::path& root, const SynthConfig& config);

/// Train and test windows for one round, z-normalized, in recording order.
/// CWRU: with fixed_test the test block is each recording's tail, otherwise
/// its position is drawn from seed. IMS: always the last files of each
/// class. Synthetic: per class the test recordings are the last ones, or a
/// random choice from seed.
TrainTest draw_round(const DatasetSource& source, std::uint64_t seed, bool fixed_test);

}  // namespace ssvae::data
