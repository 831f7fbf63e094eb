#pragma once

// Bi-level MetaBBO tasks: a meta-policy reads landscape features every step
// and sets the controls of a low-level optimizer.
//
// Budget accounting: the initial population is evaluated outside the episode
// budget, so an episode runs T = budget / m optimizer steps and budget = m
// means exactly one policy decision. EpisodeResult::fe_used counts only the
// step evaluations.
//
// Seeds: meta-training draws its problem sample and episode seeds from
// mix(train_seed, epoch, ...); testing uses mix(test_seed_base, task, problem,
// run) so a candidate analyser and the baseline see identical test runs.

#include "ltk/es.hpp"
#include "ltk/extractors.hpp"
#include "ltk/optimizers.hpp"
#include "ltk/problems.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ltk::metabbo {

inline constexpr double kZCap = 10.0;
inline constexpr double kSigmaFloor = 1e-12;
inline constexpr int kPolicyHidden = 32;

enum class FeatureMode { per_individual, population };

std::string_view mode_name(FeatureMode mode);
FeatureMode parse_mode(std::string_view name);

struct OutputRange {
  std::string name;
  double lo;
  double hi;
};

/// Two-layer perceptron: inputs -> tanh(hidden) -> lo + (hi - lo) * sigmoid(.).
/// Parameter order: W1 (in x hidden, row-major), b1, W2 (hidden x out), b2.
class MetaPolicy {
 public:
  MetaPolicy() = default;
  MetaPolicy(Eigen::Index input_width, std::vector<OutputRange> outputs, int hidden = kPolicyHidden);

  static std::size_t parameter_count(Eigen::Index input_width, std::size_t outputs, int hidden = kPolicyHidden);

  Eigen::Index input_width() const { return input_width_; }
  int hidden() const { return hidden_; }
  const std::vector<OutputRange>& outputs() const { return outputs_; }
  std::size_t size() const { return params_.size(); }
  const std::vector<double>& params() const { return params_; }
  /// Throws ConfigError on a length mismatch.
  void set_params(std::vector<double> values);

  /// One output row per input row; every entry lies inside its declared range.
  Matrix act(const Matrix& inputs) const;

 private:
  Eigen::Index input_width_ = 0;
  int hidden_ = kPolicyHidden;
  std::vector<OutputRange> outputs_;
  std::vector<double> params_;
};

struct InnerTrainConfig {
  es::Variant variant = es::Variant::sep_cmaes;
  int population = 6;
  int epochs = 3;
  double sigma = 0.3;
  int problems_per_epoch = 2;
};

struct TaskSpec {
  std::string id;
  optimizers::Kind optimizer = optimizers::Kind::de;
  FeatureMode feature_mode = FeatureMode::per_individual;
  int population = optimizers::kDefaultPopulation;
  long budget = 2000;
  std::vector<problems::ProblemSpec> train;
  std::vector<problems::ProblemSpec> test;
  AnalyzerSlot analyzer_slot = AnalyzerSlot::neural;
  InnerTrainConfig inner;
  std::uint64_t policy_seed = 0;
  /// Expected analyser feature width; checked against checkpoints when set.
  std::optional<int> feature_width;

  /// Throws ConfigError on empty sets, budget < m, overlapping function ids,
  /// or a per-individual PSO task.
  void validate() const;
  int horizon() const { return static_cast<int>(budget / population); }
};

/// Policy input width for an extractor: its own width in population mode;
/// in per-individual mode the native per-candidate width, or the population
/// width plus two (rank and distance to best) for population-only extractors.
Eigen::Index policy_input_width(const FeatureExtractor& extractor, FeatureMode mode);
std::vector<OutputRange> policy_outputs(optimizers::Kind kind);
/// Small Gaussian weights drawn from `task.policy_seed`.
MetaPolicy initial_policy(const TaskSpec& task, const FeatureExtractor& extractor);

struct StepRecord {
  std::string digest;           // population bits before the step
  std::vector<double> config;   // DE: mean F, mean Cr; PSO: w, c1, c2
  double reward;
};

struct EpisodeResult {
  double f_star = 0.0;
  double initial_best = 0.0;
  std::vector<StepRecord> steps;
  std::vector<double> best_history;
  long fe_used = 0;   // step evaluations, <= budget
  long fe_total = 0;  // including the initial population
  double total_reward() const;
};

/// Called before every optimizer step with the observation and the chosen
/// per-candidate configuration (m x outputs for DE, 1 x 3 for PSO).
using StepObserver = std::function<void(int step, const Observation& obs, const Matrix& config)>;

EpisodeResult run_episode(const TaskSpec& task, const FeatureExtractor& extractor, const MetaPolicy& policy,
                          const problems::ProblemSpec& problem, std::uint64_t seed,
                          const StepObserver& observer = {});

/// Objective for the inner or outer searches: parameters and epoch to fitness.
using ParamFitness = std::function<double(const Vector& params, int epoch)>;
using EpochCallback = std::function<void(int epoch, const Vector& best_params, double best_fitness)>;

struct SearchResult {
  Vector best;
  double best_fitness = -std::numeric_limits<double>::infinity();
  std::vector<double> epoch_best;  // best-so-far after each epoch
};

/// Generic maximisation by an inner ES started at `init`. epochs = 0 returns
/// `init` unevaluated.
SearchResult inner_search(const Vector& init, const InnerTrainConfig& cfg, std::uint64_t seed,
                          const ParamFitness& fitness, const EpochCallback& on_epoch = {});

/// Mean total reward of the policy over the epoch's sampled train problems.
/// Adds the evaluations spent to `fe_used` when given.
double policy_fitness(const TaskSpec& task, const FeatureExtractor& extractor, const MetaPolicy& policy,
                      std::uint64_t train_seed, int epoch, long* fe_used = nullptr);

struct MetaTrainResult {
  MetaPolicy policy;
  double best_fitness = -std::numeric_limits<double>::infinity();
  std::vector<double> epoch_best;
  long fe_used = 0;
};

MetaTrainResult meta_train(const TaskSpec& task, const FeatureExtractor& extractor, std::uint64_t train_seed,
                           const std::optional<MetaPolicy>& init = std::nullopt);

/// -(f - mu) / sigma; when sigma < 1e-12: 0 if |f - mu| < 1e-12, otherwise
/// sign(mu - f) * kZCap.
double z_score(double f_star, double mu, double sigma);

struct ProblemStats {
  int function_id = 0;
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation over the Q runs
  std::vector<double> f_star;
};

struct BaselineStats {
  std::string task_id;
  int Q = 0;
  std::uint64_t seed_base = 0;
  std::uint64_t train_seed = 0;
  std::uint64_t task_fingerprint = 0;
  std::vector<ProblemStats> problems;  // aligned with TaskSpec::test

  std::string key() const;
  std::string to_json() const;
  static BaselineStats from_json(std::string_view text);
};

std::uint64_t test_seed(std::uint64_t seed_base, const std::string& task_id, std::size_t problem, int run);
std::uint64_t task_hash(const std::string& task_id);
/// Hash of everything in a task that influences its results.
std::uint64_t fingerprint(const TaskSpec& task);

/// Sums in index order; shared by the baseline and the candidate so that
/// identical run results give bit-identical means.
double ordered_mean(const std::vector<double>& v);
double population_std(const std::vector<double>& v);

/// f* of every (test problem, run) cell, problems outer.
std::vector<std::vector<double>> test_policy(const TaskSpec& task, const FeatureExtractor& extractor,
                                             const MetaPolicy& policy, int Q, std::uint64_t seed_base);

struct Upsilon {
  double value = 0.0;
  std::vector<std::vector<double>> z;  // P x Q
  std::vector<std::vector<double>> f_star;
  long fe_used = 0;
};

/// Per problem: z_score(mean_q f*, mu, sigma), which equals the mean of the
/// per-run Z values; for sigma below the floor, the mean of the capped
/// per-run values. The result averages problems.
Upsilon upsilon_from(const std::vector<std::vector<double>>& f_star, const BaselineStats& baseline);

struct RelativeResult {
  Upsilon upsilon;
  MetaPolicy policy;
  long fe_used = 0;  // meta-training plus testing
};

/// Meta-trains the task's policy with `extractor`, tests it with the baseline's
/// seeds and reports Upsilon. Throws ConfigError naming a problem the baseline
/// does not cover.
RelativeResult relative_performance(const TaskSpec& task, const FeatureExtractor& extractor,
                                    const BaselineStats& baseline, std::uint64_t train_seed);

}  // namespace ltk::metabbo
