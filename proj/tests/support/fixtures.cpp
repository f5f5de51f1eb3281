#include "fixtures.hpp"

#include "ssvae/rng.hpp"

namespace testutil {

namespace fs = std::filesystem;
using namespace ssvae;

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ssvae_fixture_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_cwru_fixture(const fs::path& root, std::size_t length) {
  const auto& dirs = data::cwru_class_dirs();
  const int speeds[] = {1730, 1750, 1772};
  RngStream rng(1234);
  for (std::size_t c = 0; c < dirs.size(); ++c) {
    for (int rpm : speeds) {
      data::Recording rec;
      rec.sample_rate_hz = 12000;
      rec.class_label = static_cast<int>(c);
      rec.rpm = rpm;
      rec.source_id = dirs[c] + "_" + std::to_string(rpm);
      rec.samples.resize(length);
      for (auto& v : rec.samples) v = static_cast<float>(rng.normal());
      data::write_recording(rec, root / dirs[c] / (rec.source_id + ".f32"), 1);
    }
  }
}

void write_ims_fixture(const fs::path& root, const data::ImsProtocol& protocol) {
  RngStream rng(4321);
  auto write_range = [&](const std::string& dir, std::int64_t first, std::int64_t last) {
    for (std::int64_t i = first; i <= last; ++i) {
      const fs::path file = root / dir / (std::to_string(i) + ".f32");
      if (fs::exists(file)) continue;
      data::Recording rec;
      rec.sample_rate_hz = 20480;
      rec.source_id = dir + "/" + std::to_string(i);
      rec.sequence = i;
      rec.samples.resize(data::kImsFilePoints);
      for (auto& v : rec.samples) v = static_cast<float>(rng.normal());
      data::write_recording(rec, file);
    }
  };
  write_range(protocol.healthy_directory, 1, static_cast<std::int64_t>(protocol.healthy_files));
  for (const auto& f : protocol.faults) {
    const auto [first, last] = protocol.fault_range(f);
    write_range(f.directory, first, last);
  }
}

}  // namespace testutil
