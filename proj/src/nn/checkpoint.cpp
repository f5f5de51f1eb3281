#include "ssvae/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ssvae/error.hpp"

namespace ssvae::nn {

namespace {

void write_le_floats(std::ostream& out, const Tensor& t) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  } else {
    for (float v : t.values()) {
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      char bytes[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8), static_cast<char>(bits >> 16),
                       static_cast<char>(bits >> 24)};
      out.write(bytes, 4);
    }
  }
}

void read_le_floats(std::istream& in, Tensor& t, const std::string& name) {
  std::vector<unsigned char> raw(t.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw DataError("checkpoint truncated in payload of " + name);
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    const unsigned char* b = raw.data() + 4 * i;
    const std::uint32_t bits = std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
                               (std::uint32_t(b[3]) << 24);
    t[i] = std::bit_cast<float>(bits);
  }
}

bool valid_token(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') return false;
  }
  return true;
}

}  // namespace

const Tensor& Checkpoint::entry(const std::string& name) const {
  for (const auto& [n, t] : entries) {
    if (n == name) return t;
  }
  throw DataError("checkpoint has no entry " + name);
}

const std::string& Checkpoint::meta_value(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw DataError("checkpoint has no meta key " + key);
  return it->second;
}

std::size_t Checkpoint::meta_size(const std::string& key) const {
  const std::string& v = meta_value(key);
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    throw DataError("checkpoint meta " + key + " is not an integer: " + v);
  }
}

double Checkpoint::meta_double(const std::string& key) const {
  const std::string& v = meta_value(key);
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw DataError("checkpoint meta " + key + " is not a number: " + v);
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (!valid_token(checkpoint.kind)) throw ConfigError("checkpoint kind must be a single token");
  std::ostringstream header;
  header << kCheckpointMagic;
  header << "kind " << checkpoint.kind << '\n';
  for (const auto& [key, value] : checkpoint.meta) {
    if (!valid_token(key) || !valid_token(value)) {
      throw ConfigError("checkpoint meta keys and values must be single tokens: " + key);
    }
    header << "meta " << key << ' ' << value << '\n';
  }
  for (const auto& [name, t] : checkpoint.entries) {
    if (!valid_token(name)) throw ConfigError("checkpoint entry names must be single tokens: " + name);
    header << "entry " << name << " f32 " << t.rank();
    for (std::size_t d : t.shape()) header << ' ' << d;
    header << '\n';
  }
  header << "end\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& [name, t] : checkpoint.entries) write_le_floats(out, t);
  if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path.string());
  char magic[sizeof(kCheckpointMagic) - 1];
  in.read(magic, sizeof(magic));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(magic)) ||
      std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw DataError("not a checkpoint (bad magic): " + path.string());
  }
  Checkpoint ck;
  std::string line;
  bool ended = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "end") {
      ended = true;
      break;
    }
    if (tag == "kind") {
      ls >> ck.kind;
    } else if (tag == "meta") {
      std::string key, value;
      ls >> key >> value;
      ck.meta[key] = value;
    } else if (tag == "entry") {
      std::string name, dtype;
      std::size_t rank = 0;
      ls >> name >> dtype >> rank;
      if (dtype != "f32") throw DataError("unsupported checkpoint dtype '" + dtype + "' for " + name);
      if (!ls || rank == 0 || rank > 8) throw DataError("malformed checkpoint entry line: " + line);
      Shape shape(rank);
      for (auto& d : shape) ls >> d;
      if (!ls) throw DataError("malformed checkpoint entry line: " + line);
      ck.entries.emplace_back(name, Tensor(shape));
    } else {
      throw DataError("unexpected checkpoint header line: " + line);
    }
  }
  if (!ended) throw DataError("checkpoint header not terminated: " + path.string());
  for (auto& [name, t] : ck.entries) read_le_floats(in, t, name);
  return ck;
}

void append_store(Checkpoint& checkpoint, const ParamStore& store) {
  for (const auto& [name, entry] : store) checkpoint.entries.emplace_back(name, entry.value);
}

void restore_store(const Checkpoint& checkpoint, ParamStore& store) {
  for (auto& [name, entry] : store) {
    const Tensor& t = checkpoint.entry(name);
    if (t.shape() != entry.value.shape()) {
      throw DataError("checkpoint entry " + name + " has shape " + shape_str(t.shape()) + ", model expects " +
                      shape_str(entry.value.shape()));
    }
    entry.value = t;
  }
}

}  // namespace ssvae::nn
