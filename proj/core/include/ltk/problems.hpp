#pragma once

// Synthetic BBOB-style problem suite.
//
// Every function is implemented in its unrotated closed form around the
// origin; an instance-level offset O turns f(z) into f(x - O). All 24 ids are
// accepted. Ids 9 and 10 coincide with 8 and 2 because the rotation that
// distinguishes them in COCO is not modelled.

#include "ltk/rng.hpp"
#include "ltk/types.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ltk::problems {

inline constexpr double kLowerBound = -5.0;
inline constexpr double kUpperBound = 5.0;
inline constexpr double kOffsetRadius = 4.0;
inline constexpr int kNumFunctions = 24;

struct NoiseModel {
  enum class Kind { gaussian_multiplicative, cauchy_additive };
  Kind kind = Kind::gaussian_multiplicative;
  double level = 0.0;
};

std::string_view noise_kind_name(NoiseModel::Kind kind);
NoiseModel::Kind parse_noise_kind(std::string_view name);

struct ProblemSpec {
  int function_id = 1;
  int dimension = 2;
  std::vector<double> offset;  // length == dimension
  std::optional<NoiseModel> noise;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Spec with an offset drawn uniformly from [-4, 4]^d using `seed`.
ProblemSpec random_spec(int function_id, int dimension, std::uint64_t seed,
                        std::optional<NoiseModel> noise = std::nullopt);

std::string_view function_name(int function_id);
bool is_implemented(int function_id);

/// Noise-free objective in the unshifted frame, i.e. f(z) with optimum near z = 0.
class BbobFunction {
 public:
  BbobFunction(int function_id, int dimension);

  double operator()(std::span<const double> z) const;

  int id() const { return id_; }
  int dimension() const { return dim_; }

 private:
  struct Peak {
    std::vector<double> center;
    std::vector<double> precision;  // diagonal of C_i
    double weight;
  };

  double gallagher(std::span<const double> z) const;

  int id_;
  int dim_;
  std::vector<Peak> peaks_;  // Gallagher functions only
};

/// A problem instance: shifted function, optional noise, FE accounting.
/// Not thread safe; every run owns its own instance.
class Problem {
 public:
  explicit Problem(ProblemSpec spec, std::optional<long> budget = std::nullopt);

  /// Evaluates every row of X (m x d). Rows must lie inside the box.
  /// Throws BudgetExhausted without charging anything when fe + m > budget.
  Vector evaluate_batch(const Matrix& X);

  /// Noise-free, uncharged evaluation in the decision space. Diagnostics only.
  double peek(std::span<const double> x) const;

  const ProblemSpec& spec() const { return spec_; }
  long fe_count() const { return fe_count_; }
  double best_so_far() const { return best_so_far_; }
  std::optional<long> budget() const { return budget_; }
  int dimension() const { return spec_.dimension; }
  Vector lower() const { return Vector::Constant(spec_.dimension, kLowerBound); }
  Vector upper() const { return Vector::Constant(spec_.dimension, kUpperBound); }

 private:
  ProblemSpec spec_;
  BbobFunction function_;
  std::optional<long> budget_;
  long fe_count_ = 0;
  double best_so_far_;
  Rng noise_rng_;
};

/// Validates `spec` and builds a fresh instance with fe_count = 0.
Problem make_problem(const ProblemSpec& spec, std::optional<long> budget = std::nullopt);

struct Split {
  std::set<int> train;
  std::set<int> test;
};

/// The fixed 12/12 BBOB train/test partition.
Split bbob_split();

}  // namespace ltk::problems
