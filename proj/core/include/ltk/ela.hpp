#pragma once

// Classical exploratory landscape features computed from one population,
// plus the eight-feature hand-crafted state used as the baseline analyser.
//
// Every feature is either a finite number or explicitly missing; NaN never
// escapes this module. All groups are deterministic functions of (X, y) and
// the search box. Distance work is done with direct loops rather than Gram
// tricks so that coincident points give exactly zero distance.

#include "ltk/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ltk::problems {
class Problem;
}

namespace ltk::ela {

using Feature = std::optional<double>;

struct NamedFeature {
  std::string name;
  Feature value;
};

struct FeatureVector {
  std::vector<NamedFeature> entries;
  Eigen::Index m = 0;
  Eigen::Index d = 0;

  std::size_t size() const { return entries.size(); }
  std::vector<std::string> names() const;
  /// Missing entries replaced by `fill`.
  Vector imputed(double fill = 0.0) const;
  std::size_t missing_count() const;
  const Feature& at(const std::string& name) const;

  void append(const FeatureVector& other);
};

inline const std::vector<double> kDefaultQuantiles = {0.02, 0.05, 0.1, 0.25};

/// {fdc.corr_dist_best, fdc.dist_mean, fdc.dist_std, fdc.ydiff_mean,
///  fdc.ydiff_std, fdc.centroid_best}. Distances from the best sample use the
/// lowest index among tied minima. The last entry is scaled by the box diagonal.
FeatureVector fdc_features(const Observation& obs);

/// Per quantile q: best k = ceil(q m) samples; ratio and difference of their
/// mean pairwise distance against the whole sample's. k < 2 gives missing.
FeatureVector dispersion_features(const Observation& obs,
                                  const std::vector<double>& quantiles = kDefaultQuantiles);

/// Epsilon grid {0} followed by 15 log-spaced values from 1e-5 to 1e5.
std::vector<double> ic_epsilon_grid();

/// {ic.h_max, ic.eps_s, ic.m0, ic.eps_half, ic.neutral0} over the nearest
/// neighbour tour that starts at the best sample. Symbols come from
/// differences of min-max normalised y along the tour.
FeatureVector information_content(const Observation& obs);

/// {nbc.nb_nn_ratio, nbc.ratio_std, nbc.nn_rank_corr}. "Better" is the
/// (y, index) lexicographic order, so the single best sample has no better
/// neighbour and is left out of the nb statistics.
FeatureVector nbc_features(const Observation& obs);

/// {dist.skewness, dist.kurtosis, dist.peaks}. Population moments; peaks are
/// counted on a 64-bin histogram smoothed with a Gaussian of two bins width.
FeatureVector distribution_features(const Vector& y);

/// Least-squares surrogate fits: adjusted R^2 of linear, linear with
/// interactions, quadratic and quadratic with interactions models, plus the
/// intercept and max/min absolute coefficient ratio of the linear model.
FeatureVector meta_model_features(const Observation& obs);

/// For y quantiles {0.1, 0.25, 0.5}: 10-fold cross-validated error of linear
/// and quadratic discriminant analysis separating samples below the quantile
/// from the rest, and their ratio. Folds are i mod 10.
FeatureVector level_set_features(const Observation& obs);

/// Function-evaluation consuming groups. Only for offline analysis.
struct ProbeOptions {
  int convexity_pairs = 100;
  double convexity_eps = 1e-10;
  int local_starts = 10;
  long local_budget_per_start = 200;
};

FeatureVector convexity_features(const Observation& obs, problems::Problem& problem, std::uint64_t seed,
                                 const ProbeOptions& opts = {});
FeatureVector local_search_features(const Observation& obs, problems::Problem& problem,
                                    const ProbeOptions& opts = {});

/// FDC, dispersion, information content, NBC and distribution, in that order.
FeatureVector baseline_suite(const Observation& obs);
/// baseline_suite plus meta-model and level-set groups. Consumes no evaluations.
FeatureVector full_suite(const Observation& obs);

/// Names produced by full_suite; independent of the data and of (m, d).
std::vector<std::string> full_suite_names();

/// Width of baseline_suite's output; fixed regardless of (m, d).
std::size_t baseline_width();

/// CSV text with a header naming every feature; missing values written as "NA".
std::string to_csv(const std::vector<FeatureVector>& rows);

struct RunContext {
  int step = 0;                      // t, steps already taken
  int horizon = 1;                   // T
  std::vector<double> best_history;  // best-so-far after each step, index 0 = initial population
  Observation population;
};

inline constexpr std::size_t kHandcraftedWidth = 8;

/// {t/T, progress of best-so-far relative to the initial best clipped to
/// [-1, 1], std of min-max normalised y, mean distance to the population best,
/// mean pairwise distance, steps since improvement / T, relative improvement of
/// the last step, centroid-to-best distance}. Distances are divided by the box
/// diagonal.
Vector handcrafted_state(const RunContext& ctx);
std::vector<std::string> handcrafted_names();

}  // namespace ltk::ela
