#pragma once

// On-disk layout: one recording per file,
//
//   <root>/<class_dir>/<name>.f32    raw little-endian float32 samples
//   <root>/<class_dir>/<name>.meta   "key = value" lines
//
// Meta keys: sample_rate_hz (required), label, source_id, sequence, rpm.
// CWRU labels are the class numbers 1..10 (stored 0-based in memory);
// IMS files are named by their 1-based file number inside a bearing
// directory and need no label.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ssvae/data/segments.hpp"

namespace ssvae::data {

/// Writes <path> (samples) and its .meta sidecar. `label_offset` is added to
/// class_label in the meta file.
void write_recording(const Recording& rec, const std::filesystem::path& path, int label_offset = 0);
/// Reads <path> and its sidecar; class_label = meta label - label_offset (0
/// when absent), source_id defaults to "<class_dir>/<stem>".
Recording read_recording(const std::filesystem::path& path, int label_offset = 0);

/// All recordings below root whose meta carries a label, sorted by path.
/// Used for synthetic datasets written by write_dataset.
std::vector<Recording> load_labeled_tree(const std::filesystem::path& root, std::vector<std::string>* warnings = nullptr);
/// Writes recordings as <root>/class_<k>/<source_id>.f32 with 0-based labels.
void write_dataset(const std::vector<Recording>& recordings, const std::filesystem::path& root);

// ---- CWRU -------------------------------------------------------------------

inline constexpr std::size_t kCwruClasses = 10;

/// Directory names for classes 1..10: ball_007, ball_014, ball_021, ir_007,
/// ir_014, ir_021, or_007, or_014, or_021, normal.
const std::vector<std::string>& cwru_class_dirs();
/// 1-based class number for a fault location (ball, ir, or, normal) and
/// diameter in mils (7, 14, 21; ignored for normal).
int cwru_class(const std::string& location, int mils);

/// Recordings of every known class directory (speeds merged under one
/// label, class_label 0-based). Unknown directories and files without a
/// readable sidecar are skipped with a warning; a meta label that disagrees
/// with its directory is a DataError, as is a class without recordings.
std::vector<Recording> load_cwru(const std::filesystem::path& root, std::vector<std::string>* warnings = nullptr);

struct CwruProtocol {
  std::size_t window = kDefaultWindow;
  double sliding_ratio = kDefaultSlidingRatio;
  /// 10 classes x 3 speeds x 430 / 30 gives 12,900 train / 900 test windows.
  std::size_t train_per_recording = 430;
  std::size_t test_per_recording = 30;
  void validate() const;
};

struct TrainTest {
  SegmentSet train;
  SegmentSet test;
};

/// Per recording, a contiguous block of test windows separated from the
/// training windows by one full window on each side. Without a seed the
/// block is the tail of the recording; with one its position is drawn among
/// the window-grid positions that leave enough room for the training
/// windows. Throws DataError when a recording is too short.
TrainTest cwru_windows(const std::vector<Recording>& recordings, const CwruProtocol& protocol,
                       std::optional<std::uint64_t> block_seed = std::nullopt);

// ---- IMS --------------------------------------------------------------------

inline constexpr std::size_t kImsClasses = 4;
inline constexpr std::size_t kImsFilePoints = 20480;

struct ImsFault {
  std::string directory;
  int class_label;
  /// Degradation starting point (AEC), a file number.
  std::int64_t degradation_start;
};

struct ImsProtocol {
  /// Class 0 (healthy) comes from the first healthy_files of this directory.
  std::string healthy_directory = "subset1_bearing3";
  std::size_t healthy_files = 210;
  /// Inner race (1), rolling element (2), outer race (3).
  std::vector<ImsFault> faults{{"subset1_bearing3", 1, 2027}, {"subset1_bearing4", 2, 1641}, {"subset2_bearing1", 3, 547}};
  std::size_t files_per_fault = 210;
  /// The selection ends this many files after the degradation start.
  std::size_t files_after_start = 15;
  /// Last files of every class held out for testing.
  std::size_t test_files = 10;
  std::size_t window = kDefaultWindow;
  /// 1.0: 20 disjoint windows per 20,480-point file.
  double sliding_ratio = 1.0;

  /// First and last (inclusive) file numbers selected for a fault.
  std::pair<std::int64_t, std::int64_t> fault_range(const ImsFault& fault) const;
  void validate() const;
};

/// Healthy class limited to its first 110 files.
ImsProtocol ims_strict_healthy();

/// Selected files as recordings with class_label and sequence = file
/// number. Missing files are reported together as a DataError listing the
/// absent ranges per directory.
std::vector<Recording> load_ims(const std::filesystem::path& root, const ImsProtocol& protocol = {});

/// Last test_files of every class (by sequence) are the test set.
TrainTest ims_windows(const std::vector<Recording>& recordings, const ImsProtocol& protocol);

}  // namespace ssvae::data
