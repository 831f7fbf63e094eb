#pragma once

// Subcommand implementations, kept out of main so tests can drive them
// without a process boundary. Every command throws ltk errors; exit_code maps
// them to the process status.

#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace ltk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitIntegrity = 4;

inline constexpr const char* kOutputRootEnv = "LTK_OUTPUT_ROOT";
inline constexpr const char* kResolvedConfig = "config.json";

/// Config value, else $LTK_OUTPUT_ROOT, else ./runs.
std::filesystem::path output_root(const std::optional<std::string>& configured);

struct TrainOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> resume;  // existing run directory
  std::optional<int> jobs;
  std::optional<int> halt_after;
};

/// Returns the run directory.
std::filesystem::path cmd_train(const TrainOptions& opt, std::ostream& out);

struct EvaluateOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path task;  // run configuration declaring the task
  std::string mode = "zero_shot";
  int epochs = 5;
  std::optional<std::string> task_id;  // default: every task in the file
  std::optional<std::filesystem::path> output;
};

void cmd_evaluate(const EvaluateOptions& opt, std::ostream& out);

struct ExtractOptions {
  std::string extractor;  // "ela", "handcrafted" or a checkpoint path
  std::filesystem::path input;
  std::optional<std::filesystem::path> output;
};

void cmd_extract(const ExtractOptions& opt, std::ostream& out);

struct BenchOptions {
  std::optional<std::filesystem::path> grid;
  std::optional<std::filesystem::path> output;
};

void cmd_bench(const BenchOptions& opt, std::ostream& out);

struct AnalyzeOptions {
  std::string kind;  // "rq3" or "correlation"
  std::vector<std::filesystem::path> inputs;
  std::optional<std::filesystem::path> output;
  std::optional<std::string> task_id;
  int runs = 4;
};

void cmd_analyze(const AnalyzeOptions& opt, std::ostream& out);

int exit_code(const std::exception& e);

}  // namespace ltk::cli
