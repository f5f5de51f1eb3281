#pragma once

// Label-budget splits of the training windows and their CSV manifests.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssvae/data/segments.hpp"

namespace ssvae::data {

enum class BudgetPolicy {
  /// N labels drawn uniformly from the (shuffled) training windows.
  kUniform,
  /// Per class, the chronologically latest windows are labeled first.
  kFromEnd,
};

const char* budget_policy_name(BudgetPolicy policy) noexcept;
BudgetPolicy parse_budget_policy(const std::string& name);

struct SemiSplit {
  SegmentSet labeled;
  /// Labels are kUnlabeled.
  SegmentSet unlabeled;
  SegmentSet test;
  std::uint64_t seed = 0;
};

/// Splits train into N labeled and the remaining unlabeled windows; test is
/// passed through. kUniform first takes one random window of every class
/// when N >= classes, then fills up uniformly at random. kFromEnd spreads N
/// as evenly as possible over the classes (lower classes take the remainder,
/// shortfalls move to classes with windows left) and labels each class's
/// windows in decreasing (sequence, offset) order. Throws ConfigError when N
/// exceeds the training set.
SemiSplit label_budget(const SegmentSet& train, const SegmentSet& test, std::size_t n, std::size_t classes,
                       BudgetPolicy policy, std::uint64_t seed);

/// Pairs of windows from a and b cut from the same source with overlapping
/// sample ranges.
std::size_t overlapping_windows(const SegmentSet& a, const SegmentSet& b);

struct ManifestRow {
  std::string origin;
  std::size_t offset = 0;
  std::string role;
  int label = kUnlabeled;
  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

/// CSV with header origin,offset,role,label; role is labeled, unlabeled or
/// test; unlabeled rows leave the label empty.
void write_manifest(const SemiSplit& split, const std::filesystem::path& path);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

}  // namespace ssvae::data
