#include "commands.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>

int main(int argc, char** argv) {
  namespace cli = ltk::cli;
  CLI::App app{"Landscape-analysis toolkit: train, evaluate and inspect learned landscape analysers"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Log progress to stderr");

  cli::TrainOptions train;
  auto* t = app.add_subcommand("train", "Meta-train an analyser from a run configuration");
  t->add_option("--config", train.config, "Run configuration (JSON)");
  t->add_option("--resume", train.resume, "Continue an existing run directory");
  t->add_option("--jobs", train.jobs, "Worker threads for fitness pipelines");
  t->add_option("--halt-after", train.halt_after, "Stop after this many generations (resumable)");

  cli::EvaluateOptions eval;
  auto* e = app.add_subcommand("evaluate", "Report relative performance of a trained analyser on a task");
  e->add_option("--checkpoint", eval.checkpoint, "Analyser checkpoint")->required();
  e->add_option("--task", eval.task, "Run configuration declaring the task(s)")->required();
  e->add_option("--mode", eval.mode, "zero_shot or fine_tune")->capture_default_str();
  e->add_option("--epochs", eval.epochs, "Fine-tuning epochs")->capture_default_str();
  e->add_option("--task-id", eval.task_id, "Evaluate only this task");
  e->add_option("--output", eval.output, "Directory for curve and Z-table CSVs");

  cli::ExtractOptions ext;
  auto* x = app.add_subcommand("extract", "Compute landscape features for an observation file");
  x->add_option("--extractor", ext.extractor, "ela, handcrafted or a checkpoint path")->required();
  x->add_option("--input", ext.input, "Observation CSV")->required();
  x->add_option("--output", ext.output, "Feature CSV (default: stdout)");

  cli::BenchOptions bench;
  auto* b = app.add_subcommand("bench", "Time feature extraction over an (m, d) grid");
  b->add_option("--grid", bench.grid, "Grid description (JSON)");
  b->add_option("--output", bench.output, "Timing table CSV (default: stdout)");

  cli::AnalyzeOptions an;
  auto* a = app.add_subcommand("analyze", "Export interpretation studies");
  a->add_option("--kind", an.kind, "rq3 or correlation")->required();
  a->add_option("--inputs", an.inputs, "rq3: checkpoint config; correlation: two feature CSVs")->required();
  a->add_option("--output", an.output, "Output directory");
  a->add_option("--task-id", an.task_id, "rq3: task to study");
  a->add_option("--runs", an.runs, "rq3: runs per test problem")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? cli::kExitOk : cli::kExitConfig;
  }
  spdlog::set_default_logger(spdlog::stderr_color_mt("ltk"));
  spdlog::set_level(verbose ? spdlog::level::info : spdlog::level::warn);

  try {
    if (t->parsed()) cli::cmd_train(train, std::cout);
    else if (e->parsed()) cli::cmd_evaluate(eval, std::cout);
    else if (x->parsed()) cli::cmd_extract(ext, std::cout);
    else if (b->parsed()) cli::cmd_bench(bench, std::cout);
    else if (a->parsed()) cli::cmd_analyze(an, std::cout);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return cli::exit_code(err);
  }
  return cli::kExitOk;
}
