#pragma once

// Outer neuroevolution of the analyser over a set of MetaBBO tasks.
//
// Per generation: sample N parameter vectors, run the N x K (candidate, task)
// pipelines on a worker pool, score each candidate by its mean Upsilon over
// tasks, update the ES, then persist state, history and the best analyser.
// Pipeline seeds depend only on (run seed, generation, task), never on the
// schedule, so results do not depend on the number of workers.
//
// Output directory layout:
//   state.bin            ES state, history and best-so-far, checksummed
//   history.csv          one row per generation, deterministic
//   timing.csv           wall time per generation
//   checkpoints/gen_NNNN.ltk   best analyser after generation NNNN
//   best.ltk             final best analyser
//   baselines/<task>.json     cached baseline statistics

#include "ltk/analyzer.hpp"
#include "ltk/checkpoint.hpp"
#include "ltk/es.hpp"
#include "ltk/metabbo.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ltk::trainer {

struct TrainingRun {
  std::vector<metabbo::TaskSpec> tasks;
  analyzer::AnalyzerConfig analyzer;
  es::EsConfig es;  // dim is overwritten with the analyser parameter count
  int max_gen = 50;
  int Q = 5;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  int jobs = 1;
  /// Stop once this many generations exist in the state; used to emulate an
  /// interruption.
  std::optional<int> halt_after;

  void validate() const;
};

struct GenerationRecord {
  int generation = 0;
  std::vector<double> fitness;  // per candidate
  double generation_best = 0.0;
  double best_so_far = 0.0;
  std::string best_digest;
  double sigma = 0.0;
  long fe = 0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  std::vector<double> theta_star;
  double best_fitness = -std::numeric_limits<double>::infinity();
  std::vector<GenerationRecord> history;
  bool completed = false;
};

std::uint64_t baseline_train_seed(std::uint64_t run_seed, const std::string& task_id);
std::uint64_t test_seed_base(std::uint64_t run_seed);
std::uint64_t candidate_train_seed(std::uint64_t run_seed, int generation, const std::string& task_id);

/// Meta-trains the hand-crafted baseline of every task, tests it Q times per
/// test problem and caches the statistics under `cache_dir` keyed by
/// (task, Q, seeds). A cache hit costs no evaluations. `fe_used` receives the
/// evaluations actually spent.
std::vector<metabbo::BaselineStats> compute_baselines(const std::vector<metabbo::TaskSpec>& tasks, int Q,
                                                      std::uint64_t run_seed,
                                                      const std::optional<std::filesystem::path>& cache_dir,
                                                      long* fe_used = nullptr, int jobs = 1);

/// Mean Upsilon over tasks. Errors are rethrown with the task id attached.
double fitness(std::span<const double> theta, const TrainingRun& run,
               const std::vector<metabbo::BaselineStats>& baselines, int generation, long* fe_used = nullptr);

/// Runs or resumes (when `resume` and a state file exists) the outer loop.
TrainResult train(const TrainingRun& run, bool resume = false);

std::string history_csv(const std::vector<GenerationRecord>& history);
std::string timing_csv(const std::vector<GenerationRecord>& history);

enum class EvalMode { zero_shot, fine_tune };
EvalMode parse_eval_mode(std::string_view name);

struct EvaluationReport {
  EvalMode mode = EvalMode::zero_shot;
  std::vector<double> upsilon;       // per epoch; a single entry for zero-shot
  std::vector<double> best_so_far;   // running maximum of `upsilon`
  metabbo::Upsilon final;            // report for the best-so-far epoch
};

/// Zero-shot: freeze the analyser and meta-train only the policy.
/// Fine-tune: epoch 0 is the zero-shot result; each later epoch is one
/// generation of a joint search over (analyser, policy) parameters started
/// from it, scored by the test Upsilon of the best-so-far joint vector.
EvaluationReport evaluate(const checkpoint::AnalyzerCheckpoint& ckpt, const metabbo::TaskSpec& task,
                          const metabbo::BaselineStats& baseline, EvalMode mode, int fine_tune_epochs,
                          std::uint64_t seed);

/// Runs `n` indexed jobs on up to `jobs` threads; the first exception is
/// rethrown after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace ltk::trainer
