#pragma once

// Evolution strategies behind one init / sample / update interface.
//
// Convention: fitness is maximised. Minimisers negate at the call site.
// Updates only look at the ordering of fitness values (stable by candidate
// index, non-finite entries last), so any strictly increasing transform of the
// fitness leaves the state bit-identical.
//
// Variants and their covariance model:
//   cmaes       full matrix, rank-one + rank-mu update, lazy eigendecomposition
//   sep_cmaes   diagonal only, learning rates scaled by (D + 2) / 3
//   fast_cmaes  I mixed with two paths: the current path p and a snapshot p_hat
//               refreshed every `snapshot_interval` generations
//   r1es        I mixed with one principal path
//   rmes        I mixed with `num_paths` paths kept apart by a generation gap
// The three low-rank variants adapt sigma with the rank-based success rule:
// parents of this and the previous generation are ranked together and the
// weighted rank gain drives a smoothed log step.

#include "ltk/rng.hpp"
#include "ltk/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ltk::es {

enum class Variant { cmaes, sep_cmaes, fast_cmaes, r1es, rmes };
enum class MeanInit { zero, uniform_random };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);
std::string_view mean_init_name(MeanInit m);
MeanInit parse_mean_init(std::string_view name);

struct EsConfig {
  Variant variant = Variant::fast_cmaes;
  int dim = 1;
  int population = 10;
  double initial_sigma = 0.3;
  MeanInit mean_init = MeanInit::uniform_random;
  std::optional<double> path_lr;  // defaults: 2 / (D + 5) for the low-rank variants, CMA default otherwise
  std::uint64_t seed = 0;
  int stall_generations = 50;
  int num_paths = 2;            // rmes
  int snapshot_interval = 0;    // fast_cmaes; 0 means the population size
  std::optional<Vector> initial_mean;  // overrides mean_init when set

  /// Throws ConfigError unless dim >= 1, population >= 4 and sigma > 0.
  void validate() const;
};

struct EsState {
  EsConfig cfg;
  Vector mean;
  double sigma = 0.0;

  // cmaes
  Eigen::MatrixXd C, B;
  Vector eig_sqrt;
  long eigen_generation = -1;
  // sep_cmaes
  Vector diag;
  // cmaes, sep_cmaes
  Vector pc, ps;
  // low-rank variants
  std::vector<Vector> paths;      // r1es: [p]; fast_cmaes: [p, p_hat]; rmes: stored paths, oldest first
  std::vector<long> path_stamps;  // rmes
  Vector evo_path;                // rmes current path
  double success = 0.0;
  std::vector<double> prev_parent_fitness;

  long generation = 0;
  long evaluations = 0;
  Vector best_x;
  double best_f = -std::numeric_limits<double>::infinity();
  int stall_count = 0;
  bool stalled = false;
  int loading_events = 0;

  Rng rng{0};
};

EsState es_init(const EsConfig& cfg);

/// Draws n candidates from N(mean, sigma^2 C). Per candidate the draws are the
/// D standard normals first, then the variant's path coefficients.
std::vector<Vector> es_sample(EsState& state, int n);

/// Recombines the best floor(N / 2) candidates with weights
/// ln(N / 2 + 0.5) - ln(i), then adapts paths, covariance and sigma.
void es_update(EsState& state, const std::vector<Vector>& candidates, const std::vector<double>& fitness);

/// Recombination weights for population n, best first, summing to one.
std::vector<double> recombination_weights(int n);

/// Candidate indices sorted best first; non-finite fitness sorts last.
std::vector<std::size_t> rank_order(const std::vector<double>& fitness);

std::string to_cbor(const EsState& state);
EsState from_cbor(std::string_view bytes);

struct TraceRow {
  long generation;
  long evaluations;
  double sigma;
  double best_f;
  double generation_best_f;
};

std::string trace_csv(const std::vector<TraceRow>& rows);

}  // namespace ltk::es
