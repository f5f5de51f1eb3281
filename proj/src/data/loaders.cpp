#include "ssvae/data/loaders.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <utility>

#include "ssvae/error.hpp"
#include "ssvae/rng.hpp"

namespace ssvae::data {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> read_meta(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<std::string, std::string> meta;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
    meta[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return meta;
}

long long meta_int(const std::map<std::string, std::string>& meta, const std::string& key, const fs::path& path) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(meta.at(key), &used);
    if (used != meta.at(key).size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + ": meta '" + key + "' is not an integer");
  }
}

std::uint32_t swap_bytes(std::uint32_t u) {
  return (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
}

std::vector<float> read_samples(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open " + path.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes % 4 != 0) throw DataError(path.string() + ": size is not a multiple of 4 bytes");
  std::vector<float> samples(bytes / 4);
  in.seekg(0);
  in.read(reinterpret_cast<char*>(samples.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw DataError("failed reading " + path.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& f : samples) f = std::bit_cast<float>(swap_bytes(std::bit_cast<std::uint32_t>(f)));
  }
  return samples;
}

void warn(std::vector<std::string>* warnings, const std::string& message) {
  std::clog << "warning: " << message << '\n';
  if (warnings) warnings->push_back(message);
}

std::vector<fs::path> sorted_entries(const fs::path& dir, bool directories) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (directories ? e.is_directory() : (e.is_regular_file() && e.path().extension() == ".f32")) {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void require_dir(const fs::path& root, const char* what) {
  if (!fs::is_directory(root)) {
    throw DataError(std::string(what) + " root " + root.string() + " is not a directory");
  }
}

}  // namespace

void write_recording(const Recording& rec, const fs::path& path, int label_offset) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    if constexpr (std::endian::native == std::endian::big) {
      for (float f : rec.samples) {
        const auto u = swap_bytes(std::bit_cast<std::uint32_t>(f));
        out.write(reinterpret_cast<const char*>(&u), 4);
      }
    } else {
      out.write(reinterpret_cast<const char*>(rec.samples.data()),
                static_cast<std::streamsize>(rec.samples.size() * sizeof(float)));
    }
    if (!out) throw DataError("failed writing " + path.string());
  }
  fs::path meta_path = path;
  meta_path.replace_extension(".meta");
  std::ofstream meta(meta_path);
  if (!meta) throw DataError("cannot write " + meta_path.string());
  meta << "sample_rate_hz = " << rec.sample_rate_hz << '\n'
       << "label = " << rec.class_label + label_offset << '\n'
       << "source_id = " << rec.source_id << '\n';
  if (rec.sequence != 0) meta << "sequence = " << rec.sequence << '\n';
  if (rec.rpm != 0) meta << "rpm = " << rec.rpm << '\n';
  if (!meta) throw DataError("failed writing " + meta_path.string());
}

Recording read_recording(const fs::path& path, int label_offset) {
  fs::path meta_path = path;
  meta_path.replace_extension(".meta");
  if (!fs::exists(meta_path)) throw DataError("missing sidecar " + meta_path.string());
  const auto meta = read_meta(meta_path);
  if (!meta.count("sample_rate_hz")) throw DataError(meta_path.string() + ": sample_rate_hz missing");
  Recording rec;
  rec.sample_rate_hz = static_cast<int>(meta_int(meta, "sample_rate_hz", meta_path));
  if (rec.sample_rate_hz <= 0) throw DataError(meta_path.string() + ": sample_rate_hz must be positive");
  rec.class_label = meta.count("label") ? static_cast<int>(meta_int(meta, "label", meta_path)) - label_offset : 0;
  if (meta.count("sequence")) rec.sequence = meta_int(meta, "sequence", meta_path);
  if (meta.count("rpm")) rec.rpm = static_cast<int>(meta_int(meta, "rpm", meta_path));
  auto id = meta.find("source_id");
  rec.source_id = id != meta.end() && !id->second.empty()
                      ? id->second
                      : path.parent_path().filename().string() + "/" + path.stem().string();
  rec.samples = read_samples(path);
  return rec;
}

std::vector<Recording> load_labeled_tree(const fs::path& root, std::vector<std::string>* warnings) {
  require_dir(root, "dataset");
  std::vector<Recording> out;
  for (const auto& dir : sorted_entries(root, true)) {
    for (const auto& file : sorted_entries(dir, false)) {
      fs::path meta_path = file;
      meta_path.replace_extension(".meta");
      if (!fs::exists(meta_path) || !read_meta(meta_path).count("label")) {
        warn(warnings, "skipping " + file.string() + ": no labeled sidecar");
        continue;
      }
      out.push_back(read_recording(file));
    }
  }
  if (out.empty()) throw DataError("no labeled recordings below " + root.string());
  return out;
}

void write_dataset(const std::vector<Recording>& recordings, const fs::path& root) {
  for (const auto& rec : recordings) {
    write_recording(rec, root / ("class_" + std::to_string(rec.class_label)) / (rec.source_id + ".f32"));
  }
}

// ---- CWRU -------------------------------------------------------------------

const std::vector<std::string>& cwru_class_dirs() {
  static const std::vector<std::string> dirs{"ball_007", "ball_014", "ball_021", "ir_007", "ir_014",
                                             "ir_021",   "or_007",   "or_014",   "or_021", "normal"};
  return dirs;
}

int cwru_class(const std::string& location, int mils) {
  if (location == "normal") return 10;
  int base = 0;
  if (location == "ball") base = 0;
  else if (location == "ir") base = 3;
  else if (location == "or") base = 6;
  else throw ConfigError("unknown CWRU fault location '" + location + "'");
  switch (mils) {
    case 7: return base + 1;
    case 14: return base + 2;
    case 21: return base + 3;
    default: throw ConfigError("unknown CWRU fault diameter " + std::to_string(mils) + " mils");
  }
}

std::vector<Recording> load_cwru(const fs::path& root, std::vector<std::string>* warnings) {
  require_dir(root, "CWRU");
  const auto& names = cwru_class_dirs();
  std::vector<Recording> out;
  std::vector<std::size_t> per_class(kCwruClasses, 0);
  for (const auto& dir : sorted_entries(root, true)) {
    const auto it = std::find(names.begin(), names.end(), dir.filename().string());
    if (it == names.end()) {
      warn(warnings, "skipping unknown class directory " + dir.string());
      continue;
    }
    const int label = static_cast<int>(it - names.begin()) + 1;
    for (const auto& file : sorted_entries(dir, false)) {
      fs::path meta_path = file;
      meta_path.replace_extension(".meta");
      if (!fs::exists(meta_path)) {
        warn(warnings, "skipping " + file.string() + ": no .meta sidecar");
        continue;
      }
      const bool has_label = read_meta(meta_path).count("label") > 0;
      Recording rec = read_recording(file, 1);
      if (has_label && rec.class_label != label - 1) {
        throw DataError(file.string() + ": meta label " + std::to_string(rec.class_label + 1) +
                        " disagrees with directory " + dir.filename().string() + " (class " +
                        std::to_string(label) + ")");
      }
      rec.class_label = label - 1;
      ++per_class[label - 1];
      out.push_back(std::move(rec));
    }
  }
  std::string empty;
  for (std::size_t c = 0; c < kCwruClasses; ++c) {
    if (per_class[c] == 0) empty += (empty.empty() ? "" : ", ") + names[c];
  }
  if (!empty.empty()) throw DataError("CWRU root " + root.string() + " has no recordings for: " + empty);
  return out;
}

void CwruProtocol::validate() const {
  segment_stride(window, sliding_ratio);
  if (test_per_recording == 0 || train_per_recording == 0) {
    throw ConfigError("CWRU protocol needs positive train and test windows per recording");
  }
}

TrainTest cwru_windows(const std::vector<Recording>& recordings, const CwruProtocol& protocol,
                       std::optional<std::uint64_t> block_seed) {
  protocol.validate();
  const std::size_t w = protocol.window;
  const std::size_t s = segment_stride(w, protocol.sliding_ratio);
  const std::size_t span = (protocol.test_per_recording - 1) * s + w;
  std::optional<RngStream> rng;
  if (block_seed) rng.emplace(*block_seed);

  std::vector<SegmentSet> train_parts, test_parts;
  for (const auto& rec : recordings) {
    const std::size_t len = rec.samples.size();
    auto room = [&](std::size_t begin) {
      const std::size_t left = begin >= w ? segment_count(begin - w, w, s) : 0;
      const std::size_t right_begin = begin + span + w;
      const std::size_t right = right_begin <= len ? segment_count(len - right_begin, w, s) : 0;
      return std::pair{left, right};
    };
    const std::string too_short = "recording " + rec.source_id + " (" + std::to_string(len) +
                                  " samples) is too short for " + std::to_string(protocol.train_per_recording) +
                                  " training and " + std::to_string(protocol.test_per_recording) +
                                  " test windows";
    if (len < span) throw DataError(too_short);
    std::size_t begin = len - span;
    if (rng) {
      std::vector<std::size_t> options;
      for (std::size_t p = 0; p + span <= len; p += s) {
        const auto [l, r] = room(p);
        if (l + r >= protocol.train_per_recording) options.push_back(p);
      }
      if (options.empty()) throw DataError(too_short);
      begin = options[static_cast<std::size_t>(rng->below(options.size()))];
    }
    const auto [left, right] = room(begin);
    if (left + right < protocol.train_per_recording) throw DataError(too_short);
    test_parts.push_back(segment_range(rec, begin, begin + span, w, s));
    const std::size_t from_left = std::min(left, protocol.train_per_recording);
    if (from_left > 0) train_parts.push_back(segment_range(rec, 0, begin - w, w, s, from_left));
    if (protocol.train_per_recording > from_left) {
      train_parts.push_back(
          segment_range(rec, begin + span + w, len, w, s, protocol.train_per_recording - from_left));
    }
  }
  return {concat(train_parts), concat(test_parts)};
}

// ---- IMS --------------------------------------------------------------------

std::pair<std::int64_t, std::int64_t> ImsProtocol::fault_range(const ImsFault& fault) const {
  const std::int64_t last = fault.degradation_start + static_cast<std::int64_t>(files_after_start);
  return {last - static_cast<std::int64_t>(files_per_fault) + 1, last};
}

void ImsProtocol::validate() const {
  segment_stride(window, sliding_ratio);
  if (files_per_fault <= test_files || healthy_files <= test_files) {
    throw ConfigError("IMS protocol must leave training files after the test files");
  }
  std::set<int> labels{0};
  for (const auto& f : faults) {
    if (f.class_label <= 0 || !labels.insert(f.class_label).second) {
      throw ConfigError("IMS fault classes must be distinct and positive");
    }
    if (fault_range(f).first < 1) throw ConfigError("IMS selection for " + f.directory + " starts before file 1");
  }
}

ImsProtocol ims_strict_healthy() {
  ImsProtocol p;
  p.healthy_files = 110;
  return p;
}

std::vector<Recording> load_ims(const fs::path& root, const ImsProtocol& protocol) {
  protocol.validate();
  require_dir(root, "IMS");
  struct Want {
    std::string dir;
    int label;
    std::int64_t first, last;
  };
  std::vector<Want> wants{{protocol.healthy_directory, 0, 1, static_cast<std::int64_t>(protocol.healthy_files)}};
  for (const auto& f : protocol.faults) {
    const auto [first, last] = protocol.fault_range(f);
    wants.push_back({f.directory, f.class_label, first, last});
  }

  std::vector<Recording> out;
  std::string gaps;
  for (const auto& want : wants) {
    std::vector<std::int64_t> missing;
    for (std::int64_t i = want.first; i <= want.last; ++i) {
      const fs::path file = root / want.dir / (std::to_string(i) + ".f32");
      fs::path meta = file;
      meta.replace_extension(".meta");
      if (!fs::exists(file) || !fs::exists(meta)) {
        missing.push_back(i);
        continue;
      }
      Recording rec = read_recording(file);
      rec.class_label = want.label;
      rec.sequence = i;
      rec.source_id = want.dir + "/" + std::to_string(i);
      out.push_back(std::move(rec));
    }
    if (!missing.empty()) {
      std::ostringstream os;
      os << want.dir << ":";
      for (std::size_t a = 0; a < missing.size();) {
        std::size_t b = a;
        while (b + 1 < missing.size() && missing[b + 1] == missing[b] + 1) ++b;
        os << ' ' << missing[a];
        if (b > a) os << '-' << missing[b];
        a = b + 1;
      }
      gaps += (gaps.empty() ? "" : "; ") + os.str();
    }
  }
  if (!gaps.empty()) throw DataError("IMS root " + root.string() + " is missing files: " + gaps);
  return out;
}

TrainTest ims_windows(const std::vector<Recording>& recordings, const ImsProtocol& protocol) {
  protocol.validate();
  const std::size_t s = segment_stride(protocol.window, protocol.sliding_ratio);
  std::map<int, std::vector<const Recording*>> by_class;
  for (const auto& r : recordings) by_class[r.class_label].push_back(&r);
  std::vector<SegmentSet> train_parts, test_parts;
  for (auto& [label, recs] : by_class) {
    std::stable_sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->sequence < b->sequence; });
    if (recs.size() <= protocol.test_files) {
      throw DataError("IMS class " + std::to_string(label) + " has only " + std::to_string(recs.size()) + " files");
    }
    const std::size_t first_test = recs.size() - protocol.test_files;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      const Recording& r = *recs[i];
      (i < first_test ? train_parts : test_parts).push_back(segment_range(r, 0, r.samples.size(), protocol.window, s));
    }
  }
  return {concat(train_parts), concat(test_parts)};
}

}  // namespace ssvae::data
