#pragma once

// Low-level population optimizers whose control parameters arrive from
// outside every step. Both repair infeasible positions by clamping.

#include "ltk/problems.hpp"
#include "ltk/rng.hpp"
#include "ltk/types.hpp"

namespace ltk::optimizers {

inline constexpr int kDefaultPopulation = 50;
inline constexpr double kVelocityLimit = 0.2;  // fraction of the box width

enum class Kind { de, pso };

std::string_view kind_name(Kind kind);
Kind parse_kind(std::string_view name);

/// Per-individual controls for DE/rand/1/bin. Entries outside [0, 1] are
/// clamped with a warning.
struct DeConfig {
  Vector F;
  Vector Cr;
};

/// Population-wide PSO controls. w is clamped to [0, 1], c1 and c2 to >= 0.
struct PsoConfig {
  double w = 0.7;
  double c1 = 1.5;
  double c2 = 1.5;
};

struct OptimizerState {
  Matrix X;  // m x d
  Vector y;  // m
  Matrix velocity;  // PSO only
  Matrix pbest_x;   // PSO only
  Vector pbest_y;   // PSO only
  Eigen::Index gbest = 0;  // index into pbest, PSO only
  double best_so_far = 0.0;
  int step = 0;

  Eigen::Index population() const { return X.rows(); }
  Observation observation(const problems::Problem& problem) const;
};

/// Uniform initial population in the box; charges m evaluations. PSO fields
/// start with zero velocity and pbest = X.
OptimizerState initialize(problems::Problem& problem, int population, Rng& rng);

/// One DE/rand/1/bin generation. Per target i the draws are, in order:
/// r1, r2, r3 by rejection against {i} and earlier donors, jrand, then one
/// uniform per dimension. Trials are evaluated as one batch; a trial replaces
/// its target when it is not worse. Throws ConfigError when m < 4.
void de_step(OptimizerState& state, const DeConfig& cfg, problems::Problem& problem, Rng& rng);

/// One PSO generation. Per particle and per dimension u1 is drawn before u2.
void pso_step(OptimizerState& state, const PsoConfig& cfg, problems::Problem& problem, Rng& rng);

}  // namespace ltk::optimizers
