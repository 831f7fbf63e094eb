#pragma once

// Versioned analyser checkpoint container.
//
//   offset  size  content
//   0       8     magic "LTKCKPT\0"
//   8       4     format version (u32, little endian)
//   12      8     header length H (u64 LE)
//   20      H     header, UTF-8 JSON: analyzer config, layout table,
//                 parameter count, provenance
//   20+H    8     value count N (u64 LE)
//   28+H    8N    parameter values, IEEE-754 binary64 little endian
//   ...     8     FNV-1a 64 over every preceding byte (u64 LE)

#include "ltk/analyzer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ltk::checkpoint {

inline constexpr std::uint32_t kFormatVersion = 1;

struct Provenance {
  long generation = 0;
  std::uint64_t seed = 0;
  std::optional<double> fitness;
  std::string source;  // free-form, e.g. "train", "fine_tune"
};

struct AnalyzerCheckpoint {
  analyzer::AnalyzerConfig config;
  std::vector<double> values;
  Provenance provenance;
};

std::string serialize(const AnalyzerCheckpoint& ckpt);
/// Throws IntegrityError on bad magic, version, checksum or layout mismatch.
AnalyzerCheckpoint deserialize(std::string_view bytes);

void write(const std::filesystem::path& path, const AnalyzerCheckpoint& ckpt);
AnalyzerCheckpoint read(const std::filesystem::path& path);

std::uint64_t fnv1a(std::string_view bytes);
/// Hex digest of a parameter vector's exact bit pattern.
std::string digest(std::span<const double> values);

/// Whole-file helpers. write_file_atomic writes to a sibling temp file and renames.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace ltk::checkpoint
