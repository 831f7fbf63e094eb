#pragma once

// Observation files written by external optimizers.
//
//   # d=3 lb=-5 ub=5             bounds may be scalars or d comma-separated values
//   obs,x_1,x_2,x_3,y            the leading obs column is optional
//   0,0.1,-2.5,3.0,12.7
//
// Without an obs column the whole file is one observation; with it, rows
// sharing an id form one observation and ids must be contiguous. Blank lines
// and further '#' lines after the first are ignored.

#include "ltk/types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ltk::csv {

struct ObservationFile {
  Eigen::Index d = 0;
  Vector lb;
  Vector ub;
  std::vector<Observation> observations;
};

/// Throws ConfigError prefixed with "line N:" on malformed input.
ObservationFile parse_observations(std::string_view text);
ObservationFile read_observations(const std::filesystem::path& path);

/// Header row then one row per entry; missing values written as "NA".
std::string write_table(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::optional<double>>>& rows);

}  // namespace ltk::csv
