#include "ssvae/data/split.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "ssvae/error.hpp"
#include "ssvae/rng.hpp"

namespace ssvae::data {

const char* budget_policy_name(BudgetPolicy policy) noexcept {
  return policy == BudgetPolicy::kUniform ? "uniform" : "from_end";
}

BudgetPolicy parse_budget_policy(const std::string& name) {
  if (name == "uniform") return BudgetPolicy::kUniform;
  if (name == "from_end" || name == "from-end") return BudgetPolicy::kFromEnd;
  throw ConfigError("unknown label policy '" + name + "' (expected uniform or from_end)");
}

namespace {

std::vector<std::size_t> pick_uniform(const SegmentSet& train, std::size_t n, std::size_t classes,
                                      std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<std::size_t> order = rng.permutation(train.size());
  std::vector<char> taken(train.size(), 0);
  std::vector<std::size_t> picked;
  picked.reserve(n);
  if (n >= classes) {
    std::vector<char> seen(classes, 0);
    for (auto i : order) {
      const int y = train.labels[i];
      if (y >= 0 && static_cast<std::size_t>(y) < classes && !seen[y]) {
        seen[y] = 1;
        taken[i] = 1;
        picked.push_back(i);
      }
    }
  }
  for (auto i : order) {
    if (picked.size() >= n) break;
    if (!taken[i]) {
      taken[i] = 1;
      picked.push_back(i);
    }
  }
  return picked;
}

std::vector<std::size_t> pick_from_end(const SegmentSet& train, std::size_t n, std::size_t classes) {
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int y = train.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw ConfigError("training label outside [0, classes)");
    by_class[y].push_back(i);
  }
  for (auto& members : by_class) {
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
      const Origin& oa = train.origins[a];
      const Origin& ob = train.origins[b];
      if (oa.sequence != ob.sequence) return oa.sequence > ob.sequence;
      if (oa.offset != ob.offset) return oa.offset > ob.offset;
      return a < b;
    });
  }
  std::vector<std::size_t> quota(classes, 0);
  std::size_t left = n;
  while (left > 0) {
    std::size_t open = 0;
    for (std::size_t c = 0; c < classes; ++c) open += quota[c] < by_class[c].size();
    if (open == 0) break;
    const std::size_t share = std::max<std::size_t>(1, left / open);
    for (std::size_t c = 0; c < classes && left > 0; ++c) {
      const std::size_t give = std::min({share, by_class[c].size() - quota[c], left});
      quota[c] += give;
      left -= give;
    }
  }
  std::vector<std::size_t> picked;
  for (std::size_t c = 0; c < classes; ++c) picked.insert(picked.end(), by_class[c].begin(), by_class[c].begin() + quota[c]);
  return picked;
}

}  // namespace

SemiSplit label_budget(const SegmentSet& train, const SegmentSet& test, std::size_t n, std::size_t classes,
                       BudgetPolicy policy, std::uint64_t seed) {
  if (n > train.size()) {
    throw ConfigError("label budget " + std::to_string(n) + " exceeds the " + std::to_string(train.size()) +
                      " training windows");
  }
  if (classes == 0) throw ConfigError("label_budget needs at least one class");
  std::vector<std::size_t> picked =
      policy == BudgetPolicy::kUniform ? pick_uniform(train, n, classes, seed) : pick_from_end(train, n, classes);
  std::vector<char> is_labeled(train.size(), 0);
  for (auto i : picked) is_labeled[i] = 1;
  std::vector<std::size_t> lab, unl;
  for (std::size_t i = 0; i < train.size(); ++i) (is_labeled[i] ? lab : unl).push_back(i);

  SemiSplit split;
  split.seed = seed;
  split.labeled = subset(train, lab);
  split.unlabeled = subset(train, unl);
  std::fill(split.unlabeled.labels.begin(), split.unlabeled.labels.end(), kUnlabeled);
  split.test = test;
  return split;
}

std::size_t overlapping_windows(const SegmentSet& a, const SegmentSet& b) {
  const std::size_t wa = a.window(), wb = b.window();
  std::map<std::string, std::vector<std::size_t>> starts;
  for (const auto& o : b.origins) starts[o.source_id].push_back(o.offset);
  for (auto& [id, v] : starts) std::sort(v.begin(), v.end());
  std::size_t count = 0;
  for (const auto& o : a.origins) {
    auto it = starts.find(o.source_id);
    if (it == starts.end()) continue;
    const auto& v = it->second;
    // b windows [s, s+wb) overlap [o, o+wa) when o - wb < s < o + wa.
    const std::size_t lo = o.offset + 1 > wb ? o.offset + 1 - wb : 0;
    auto first = std::lower_bound(v.begin(), v.end(), lo);
    auto last = std::lower_bound(v.begin(), v.end(), o.offset + wa);
    count += static_cast<std::size_t>(last - first);
  }
  return count;
}

void write_manifest(const SemiSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << "origin,offset,role,label\n";
  auto rows = [&](const SegmentSet& set, const char* role, bool with_label) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      out << set.origins[i].source_id << ',' << set.origins[i].offset << ',' << role << ',';
      if (with_label) out << set.labels[i];
      out << '\n';
    }
  };
  rows(split.labeled, "labeled", true);
  rows(split.unlabeled, "unlabeled", false);
  rows(split.test, "test", true);
  if (!out) throw DataError("failed writing manifest " + path.string());
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "origin,offset,role,label") {
    throw DataError("manifest " + path.string() + " lacks the origin,offset,role,label header");
  }
  std::vector<ManifestRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != 4) throw DataError("manifest line " + std::to_string(lineno) + " does not have 4 fields");
    ManifestRow row;
    row.origin = cells[0];
    row.role = cells[2];
    try {
      row.offset = std::stoull(cells[1]);
      row.label = cells[3].empty() ? kUnlabeled : std::stoi(cells[3]);
    } catch (const std::exception&) {
      throw DataError("manifest line " + std::to_string(lineno) + " has a malformed number");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ssvae::data
