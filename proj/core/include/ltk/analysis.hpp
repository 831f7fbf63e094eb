#pragma once

// Interpretation and efficiency studies over exported features: PCA point
// clouds of exploration versus exploitation populations, Pearson correlation
// between learned and classical features, and feature-extraction wall time.

#include "ltk/analyzer.hpp"
#include "ltk/metabbo.hpp"
#include "ltk/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ltk::analysis {

inline constexpr double kStrongCorrelation = 0.6;
inline constexpr double kExplorationThreshold = 0.5;

struct FeatureSeries {
  std::string source;               // "neural" or "ela"
  std::vector<std::string> names;   // one per column
  Matrix rows;                      // n x k, missing values already imputed
  std::vector<std::string> labels;  // one per row, may be empty
  std::vector<int> trajectory;      // one per row; rows of one trajectory are contiguous in time
  std::size_t imputed = 0;          // number of entries that were missing
};

struct PcaResult {
  Vector mean;        // k
  Matrix components;  // k x out_dim, unit columns, largest-magnitude loading positive
  Vector variances;   // out_dim, descending
  Matrix projected;   // n x out_dim
};

/// Covariance eigendecomposition of the centred rows. Throws ConfigError when
/// n <= out_dim, out_dim > k, or the data has zero variance.
PcaResult pca(const Matrix& rows, int out_dim);
Matrix pca_project(const Matrix& rows, int out_dim);

/// Pearson r of two columns; missing when either is constant.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);

struct CorrelationMatrix {
  std::vector<std::string> row_names;  // columns of series a
  std::vector<std::string> col_names;  // columns of series b
  std::vector<std::vector<std::optional<double>>> r;
  std::vector<std::vector<int>> samples;  // trajectories contributing to each entry

  std::size_t strong_count(double threshold = kStrongCorrelation) const;
  std::string to_csv() const;
};

/// Entry (j, i) correlates column j of `a` with column i of `b`. When the
/// series carry trajectory ids, r is computed per trajectory and averaged
/// over the trajectories where it is defined.
CorrelationMatrix pearson_matrix(const FeatureSeries& a, const FeatureSeries& b);

enum class BenchExtractor { neural, ela, handcrafted };
std::string_view bench_name(BenchExtractor e);
BenchExtractor parse_bench(std::string_view name);

struct BenchResult {
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  int runs = 0;
};

/// Events: "construct" once before timing starts, then "begin"/"end" around
/// every timed extraction.
using BenchHook = std::function<void(std::string_view event)>;

/// Times feature extraction only on random observations in [-5, 5]^d with
/// random objective values. The ELA extractor is the full evaluation-free
/// suite. Throws ConfigError when runs < 10.
BenchResult bench_walltime(BenchExtractor extractor, Eigen::Index m, Eigen::Index d, int runs, std::uint64_t seed,
                           const analyzer::AnalyzerConfig& cfg = {}, const BenchHook& hook = {});

struct BenchCell {
  Eigen::Index m;
  Eigen::Index d;
};

/// Rows = extractor, columns = (m, d) cells, entries = mean seconds.
std::string bench_table_csv(const std::vector<BenchExtractor>& extractors, const std::vector<BenchCell>& cells,
                            const std::vector<std::vector<BenchResult>>& results);

/// "exploration" when the population's mean mutation factor exceeds 0.5.
std::string_view step_label(double mean_F);

struct Rq3Result {
  FeatureSeries neural;
  FeatureSeries ela;
  Matrix neural_2d;
  Matrix ela_2d;
  std::size_t exploration = 0;
  std::size_t exploitation = 0;
};

/// Runs a DE task `runs` times per problem with `policy` driven by
/// `policy_extractor`, records every step's population, labels it by the
/// step's mean F and extracts both the network's population features and the
/// classical suite. Each (problem, run) pair is one trajectory.
Rq3Result rq3_pipeline(const metabbo::TaskSpec& task, const metabbo::FeatureExtractor& policy_extractor,
                       const metabbo::MetaPolicy& policy, const analyzer::Network& net,
                       const std::vector<problems::ProblemSpec>& problems, int runs, std::uint64_t seed);

/// Columns x, y, label, run, step.
std::string point_cloud_csv(const Matrix& points, const FeatureSeries& series);

}  // namespace ltk::analysis
