#pragma once

// Run configuration: a single JSON document, validated against a fixed
// schema before any compute. Unknown keys are rejected; errors name the
// offending field by path (e.g. `tasks[1].problems.dimension`) or, for
// syntax errors, the line and column. The schema is documented in
// docs/config.md.

#include "ltk/analyzer.hpp"
#include "ltk/es.hpp"
#include "ltk/metabbo.hpp"
#include "ltk/problems.hpp"
#include "ltk/trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ltk::config {

/// Declarative problem set: every function id in `train`/`test` is
/// instantiated `instances` times with offsets drawn from (seed, id, instance).
struct ProblemSetDecl {
  int dimension = 10;
  std::vector<int> train;
  std::vector<int> test;
  int instances = 1;
  std::uint64_t seed = 0;
  std::optional<problems::NoiseModel> noise;
};

struct TaskDecl {
  std::string id;
  optimizers::Kind optimizer = optimizers::Kind::de;
  metabbo::FeatureMode feature_mode = metabbo::FeatureMode::per_individual;
  int population = optimizers::kDefaultPopulation;
  long budget = 2000;
  ProblemSetDecl problems;
  metabbo::InnerTrainConfig inner;
  std::uint64_t policy_seed = 0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  int Q = 5;
  int max_gen = 50;
  int jobs = 1;
  std::optional<std::string> output_root;
  analyzer::AnalyzerConfig analyzer;
  es::EsConfig es;
  std::vector<TaskDecl> tasks;
};

/// Throws ConfigError with a path or line/column diagnostic.
RunConfig parse(std::string_view text);
RunConfig load(const std::filesystem::path& path);

/// Canonical JSON with every default filled in; parse(resolved(c)) == c.
std::string resolved(const RunConfig& cfg);

metabbo::TaskSpec build_task(const TaskDecl& decl, const analyzer::AnalyzerConfig& analyzer);
trainer::TrainingRun build_run(const RunConfig& cfg, const std::filesystem::path& output_dir);

}  // namespace ltk::config
