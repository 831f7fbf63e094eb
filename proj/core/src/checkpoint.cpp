#include "ltk/checkpoint.hpp"

#include "ltk/error.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ltk::checkpoint {

namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'L', 'T', 'K', 'C', 'K', 'P', 'T', '\0'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t pos) {
  if (pos + 8 > in.size()) throw IntegrityError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::string_view in, std::size_t pos) {
  if (pos + 4 > in.size()) throw IntegrityError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

json header_json(const AnalyzerCheckpoint& ckpt) {
  json layout = json::array();
  for (const auto& entry : analyzer::parameter_layout(ckpt.config)) {
    layout.push_back({{"name", entry.name}, {"shape", entry.shape}});
  }
  json prov = {{"generation", ckpt.provenance.generation},
               {"seed", ckpt.provenance.seed},
               {"source", ckpt.provenance.source}};
  prov["fitness"] = ckpt.provenance.fitness ? json(*ckpt.provenance.fitness) : json(nullptr);
  return {{"analyzer",
           {{"hidden_dim", ckpt.config.hidden_dim},
            {"num_heads", ckpt.config.num_heads},
            {"num_layers", ckpt.config.num_layers},
            {"ff_inner_dim", ckpt.config.ff_inner_dim}}},
          {"parameter_count", analyzer::parameter_count(ckpt.config)},
          {"layout", layout},
          {"provenance", prov}};
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest(std::span<const double> values) {
  std::string raw;
  raw.reserve(values.size() * 8);
  for (double v : values) put_u64(raw, std::bit_cast<std::uint64_t>(v));
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a(raw);
  return os.str();
}

std::string serialize(const AnalyzerCheckpoint& ckpt) {
  if (ckpt.values.size() != analyzer::parameter_count(ckpt.config)) {
    throw ConfigError("checkpoint values do not match the analyzer layout");
  }
  const std::string header = header_json(ckpt).dump();
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kFormatVersion);
  put_u64(out, header.size());
  out += header;
  put_u64(out, ckpt.values.size());
  for (double v : ckpt.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  put_u64(out, fnv1a(out));
  return out;
}

AnalyzerCheckpoint deserialize(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic + 4 + 8 + 8 + 8 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw IntegrityError("not an analyser checkpoint (bad magic)");
  }
  const std::uint64_t stored = get_u64(bytes, bytes.size() - 8);
  if (fnv1a(bytes.substr(0, bytes.size() - 8)) != stored) throw IntegrityError("checkpoint checksum mismatch");
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kFormatVersion) throw IntegrityError("unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t header_len = get_u64(bytes, 12);
  if (20 + header_len + 8 > bytes.size()) throw IntegrityError("checkpoint header length out of range");

  AnalyzerCheckpoint ckpt;
  try {
    const json header = json::parse(bytes.substr(20, header_len));
    const auto& a = header.at("analyzer");
    ckpt.config.hidden_dim = a.at("hidden_dim").get<int>();
    ckpt.config.num_heads = a.at("num_heads").get<int>();
    ckpt.config.num_layers = a.at("num_layers").get<int>();
    ckpt.config.ff_inner_dim = a.at("ff_inner_dim").get<int>();
    ckpt.config.validate();
    const auto& prov = header.at("provenance");
    ckpt.provenance.generation = prov.at("generation").get<long>();
    ckpt.provenance.seed = prov.at("seed").get<std::uint64_t>();
    ckpt.provenance.source = prov.at("source").get<std::string>();
    if (!prov.at("fitness").is_null()) ckpt.provenance.fitness = prov.at("fitness").get<double>();
    if (header.at("parameter_count").get<std::size_t>() != analyzer::parameter_count(ckpt.config)) {
      throw IntegrityError("checkpoint parameter count disagrees with its analyzer config");
    }
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("invalid analyzer config in checkpoint: ") + e.what());
  }

  std::size_t pos = 20 + header_len;
  const std::uint64_t n = get_u64(bytes, pos);
  pos += 8;
  if (n != analyzer::parameter_count(ckpt.config) || pos + 8 * n + 8 != bytes.size()) {
    throw IntegrityError("checkpoint value block has the wrong length");
  }
  ckpt.values.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) ckpt.values[i] = std::bit_cast<double>(get_u64(bytes, pos + 8 * i));
  return ckpt;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write(const std::filesystem::path& path, const AnalyzerCheckpoint& ckpt) {
  write_file_atomic(path, serialize(ckpt));
}

AnalyzerCheckpoint read(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace ltk::checkpoint
