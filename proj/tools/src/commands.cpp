#include "commands.hpp"

#include "ltk/analysis.hpp"
#include "ltk/checkpoint.hpp"
#include "ltk/config.hpp"
#include "ltk/csv.hpp"
#include "ltk/ela.hpp"
#include "ltk/error.hpp"
#include "ltk/extractors.hpp"
#include "ltk/rng.hpp"
#include "ltk/trainer.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <set>
#include <sstream>

namespace ltk::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void emit(const std::optional<fs::path>& path, const std::string& text, std::ostream& out) {
  if (path) {
    if (path->has_parent_path()) fs::create_directories(path->parent_path());
    checkpoint::write_file_atomic(*path, text);
  } else {
    out << text;
  }
}

fs::path fresh_run_dir(const fs::path& root, std::uint64_t seed) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream name;
  name << std::put_time(&tm, "%Y%m%dT%H%M%SZ") << "-s" << seed;
  fs::path dir = root / name.str();
  for (int k = 1; fs::exists(dir); ++k) dir = root / (name.str() + "-" + std::to_string(k));
  fs::create_directories(dir);
  return dir;
}

std::vector<const config::TaskDecl*> select_tasks(const config::RunConfig& cfg, const std::optional<std::string>& id) {
  std::vector<const config::TaskDecl*> out;
  for (const auto& t : cfg.tasks) {
    if (!id || t.id == *id) out.push_back(&t);
  }
  if (out.empty()) throw ConfigError("no task with id '" + id.value_or("") + "' in the configuration");
  return out;
}

std::string series_csv(const analysis::FeatureSeries& s) {
  std::ostringstream os;
  os << "run,label";
  for (const auto& n : s.names) os << ',' << n;
  os << '\n';
  for (Eigen::Index i = 0; i < s.rows.rows(); ++i) {
    os << s.trajectory[i] << ',' << s.labels[i];
    for (Eigen::Index k = 0; k < s.rows.cols(); ++k) os << ',' << fmt(s.rows(i, k));
    os << '\n';
  }
  return os.str();
}

/// Reads a feature table written by series_csv or `extract`. The optional run
/// and label columns are kept aside; "NA" cells are imputed with 0 and counted.
analysis::FeatureSeries read_series(const fs::path& path) {
  const std::string text = checkpoint::read_file(path);
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  analysis::FeatureSeries s;
  s.source = path.stem().string();
  int run_col = -1, label_col = -1;
  std::vector<int> value_cols;
  std::vector<std::vector<double>> rows;
  const auto split = [](const std::string& l) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) out.push_back(cell);
    if (!l.empty() && l.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (value_cols.empty() && s.names.empty()) {
      for (int c = 0; c < static_cast<int>(cells.size()); ++c) {
        if (cells[c] == "run") run_col = c;
        else if (cells[c] == "label") label_col = c;
        else {
          value_cols.push_back(c);
          s.names.push_back(cells[c]);
        }
      }
      if (value_cols.empty()) throw ConfigError(path.string() + ": line 1: no feature columns");
      continue;
    }
    if (cells.size() != value_cols.size() + (run_col >= 0) + (label_col >= 0)) {
      throw ConfigError(path.string() + ": line " + std::to_string(line_no) + ": wrong number of fields");
    }
    std::vector<double> row;
    for (int c : value_cols) {
      if (cells[c] == "NA") {
        row.push_back(0.0);
        ++s.imputed;
        continue;
      }
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cells[c], &used));
        if (used != cells[c].size()) throw std::invalid_argument(cells[c]);
      } catch (const std::logic_error&) {
        throw ConfigError(path.string() + ": line " + std::to_string(line_no) + ": invalid number '" + cells[c] + "'");
      }
    }
    rows.push_back(std::move(row));
    if (run_col >= 0) s.trajectory.push_back(std::atoi(cells[run_col].c_str()));
    if (label_col >= 0) s.labels.push_back(cells[label_col]);
  }
  s.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(s.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) s.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return s;
}

}  // namespace

fs::path output_root(const std::optional<std::string>& configured) {
  if (configured) return *configured;
  if (const char* env = std::getenv(kOutputRootEnv); env && *env) return env;
  return "runs";
}

fs::path cmd_train(const TrainOptions& opt, std::ostream& out) {
  fs::path dir;
  config::RunConfig cfg;
  if (opt.resume) {
    dir = *opt.resume;
    if (!fs::is_directory(dir)) throw ConfigError("resume directory '" + dir.string() + "' does not exist");
    cfg = config::load(dir / kResolvedConfig);
  } else {
    if (!opt.config) throw ConfigError("train needs --config or --resume");
    cfg = config::load(*opt.config);
    dir = fresh_run_dir(output_root(cfg.output_root), cfg.seed);
    checkpoint::write_file_atomic(dir / kResolvedConfig, config::resolved(cfg));
  }
  trainer::TrainingRun run = config::build_run(cfg, dir);
  if (opt.jobs) {
    if (*opt.jobs < 1) throw ConfigError("--jobs must be at least 1");
    run.jobs = *opt.jobs;
  }
  run.halt_after = opt.halt_after;
  spdlog::info("training in {}", dir.string());
  const auto res = trainer::train(run, opt.resume.has_value());
  out << "run_dir " << dir.string() << '\n';
  out << "generations " << res.history.size() << '\n';
  out << "best_fitness " << fmt(res.best_fitness) << '\n';
  out << "completed " << (res.completed ? "yes" : "no") << '\n';
  return dir;
}

void cmd_evaluate(const EvaluateOptions& opt, std::ostream& out) {
  const auto mode = trainer::parse_eval_mode(opt.mode);
  const auto ckpt = checkpoint::read(opt.checkpoint);
  const auto cfg = config::load(opt.task);
  for (const auto* decl : select_tasks(cfg, opt.task_id)) {
    const auto task = config::build_task(*decl, cfg.analyzer);
    std::optional<fs::path> cache;
    if (opt.output) cache = *opt.output / "baselines";
    const auto baseline = trainer::compute_baselines({task}, cfg.Q, cfg.seed, cache).front();
    const auto rep = trainer::evaluate(ckpt, task, baseline, mode, opt.epochs, cfg.seed);

    std::ostringstream curve;
    curve << "epoch,upsilon,best_so_far\n";
    for (std::size_t e = 0; e < rep.upsilon.size(); ++e) {
      curve << e << ',' << fmt(rep.upsilon[e]) << ',' << fmt(rep.best_so_far[e]) << '\n';
    }
    std::ostringstream z;
    z << "problem,function_id,run,f_star,z\n";
    for (std::size_t p = 0; p < rep.final.z.size(); ++p) {
      for (std::size_t q = 0; q < rep.final.z[p].size(); ++q) {
        z << p << ',' << task.test[p].function_id << ',' << q << ',' << fmt(rep.final.f_star[p][q]) << ','
          << fmt(rep.final.z[p][q]) << '\n';
      }
    }
    out << "task " << task.id << " mode " << opt.mode << " upsilon " << fmt(rep.best_so_far.back()) << '\n'
        << curve.str() << z.str();
    if (opt.output) {
      emit(*opt.output / ("curve_" + task.id + ".csv"), curve.str(), out);
      emit(*opt.output / ("z_" + task.id + ".csv"), z.str(), out);
    }
  }
}

void cmd_extract(const ExtractOptions& opt, std::ostream& out) {
  const auto file = csv::read_observations(opt.input);
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<double>>> rows;
  if (opt.extractor == "ela") {
    header = ela::full_suite_names();
    for (const auto& obs : file.observations) {
      std::vector<std::optional<double>> row;
      for (const auto& [_, v] : ela::full_suite(obs).entries) row.push_back(v);
      rows.push_back(std::move(row));
    }
  } else if (opt.extractor == "handcrafted") {
    // A standalone population has no history: step 0 of a one-step horizon.
    header = ela::handcrafted_names();
    for (const auto& obs : file.observations) {
      const Vector v = ela::handcrafted_state({0, 1, {obs.y.minCoeff()}, obs});
      rows.emplace_back(v.begin(), v.end());
    }
  } else {
    const auto ckpt = checkpoint::read(opt.extractor);
    const auto net = analyzer::decode_params(ckpt.values, ckpt.config);
    for (int k = 0; k < ckpt.config.hidden_dim; ++k) header.push_back("neural." + std::to_string(k));
    for (const auto& obs : file.observations) {
      const Vector v = analyzer::analyze(net, obs).pop;
      rows.emplace_back(v.begin(), v.end());
    }
  }
  emit(opt.output, csv::write_table(header, rows), out);
}

void cmd_bench(const BenchOptions& opt, std::ostream& out) {
  std::vector<Eigen::Index> ms{100, 1000}, ds{10, 100};
  std::vector<analysis::BenchExtractor> extractors{analysis::BenchExtractor::neural, analysis::BenchExtractor::ela,
                                                   analysis::BenchExtractor::handcrafted};
  int runs = 10;
  std::uint64_t seed = 0;
  analyzer::AnalyzerConfig acfg;
  if (opt.grid) {
    nlohmann::json g;
    try {
      g = nlohmann::json::parse(checkpoint::read_file(*opt.grid));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(opt.grid->string() + ": " + e.what());
    }
    static const std::set<std::string> known{"m", "d", "runs", "seed", "extractors", "hidden_dim"};
    for (const auto& [k, _] : g.items()) {
      if (!known.count(k)) throw ConfigError("unknown field '" + k + "' in bench grid");
    }
    try {
      if (g.contains("m")) ms = g["m"].get<std::vector<Eigen::Index>>();
      if (g.contains("d")) ds = g["d"].get<std::vector<Eigen::Index>>();
      if (g.contains("runs")) runs = g["runs"].get<int>();
      if (g.contains("seed")) seed = g["seed"].get<std::uint64_t>();
      if (g.contains("hidden_dim")) acfg.hidden_dim = acfg.ff_inner_dim = g["hidden_dim"].get<int>();
      if (g.contains("extractors")) {
        extractors.clear();
        for (const auto& e : g["extractors"]) extractors.push_back(analysis::parse_bench(e.get<std::string>()));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bench grid: " + std::string(e.what()));
    }
  }
  std::vector<analysis::BenchCell> cells;
  for (auto m : ms) {
    for (auto d : ds) cells.push_back({m, d});
  }
  std::vector<std::vector<analysis::BenchResult>> results(extractors.size());
  for (std::size_t e = 0; e < extractors.size(); ++e) {
    for (const auto& c : cells) {
      results[e].push_back(analysis::bench_walltime(extractors[e], c.m, c.d, runs, seed, acfg));
      spdlog::info("{} m={} d={} mean={:.3e}s", analysis::bench_name(extractors[e]), c.m, c.d, results[e].back().mean);
    }
  }
  emit(opt.output, analysis::bench_table_csv(extractors, cells, results), out);
}

void cmd_analyze(const AnalyzeOptions& opt, std::ostream& out) {
  const fs::path dir = opt.output.value_or(output_root(std::nullopt) / "analysis");
  if (opt.kind == "correlation") {
    if (opt.inputs.size() != 2) throw ConfigError("correlation needs two feature tables: --inputs a.csv b.csv");
    const auto a = read_series(opt.inputs[0]);
    const auto b = read_series(opt.inputs[1]);
    const auto cm = analysis::pearson_matrix(a, b);
    emit(dir / "correlation.csv", cm.to_csv(), out);
    out << "correlation " << (dir / "correlation.csv").string() << " strong " << cm.strong_count() << '\n';
  } else if (opt.kind == "rq3") {
    if (opt.inputs.size() != 2) throw ConfigError("rq3 needs a checkpoint and a configuration: --inputs ckpt.ltk cfg.json");
    if (opt.runs < 1) throw ConfigError("--runs must be positive");
    const auto ckpt = checkpoint::read(opt.inputs[0]);
    const auto cfg = config::load(opt.inputs[1]);
    const config::TaskDecl* decl = nullptr;
    for (const auto* t : select_tasks(cfg, opt.task_id)) {
      if (t->optimizer == optimizers::Kind::de) {
        decl = t;
        break;
      }
    }
    if (!decl) throw ConfigError("rq3 needs a DE task in the configuration");
    const auto task = config::build_task(*decl, cfg.analyzer);
    const auto net = analyzer::decode_params(ckpt.values, ckpt.config);
    const metabbo::NeuralExtractor extractor(net);
    const auto policy = metabbo::meta_train(task, extractor, mix_seed({cfg.seed, metabbo::task_hash(task.id), 0x2e50ULL})).policy;
    const auto res = analysis::rq3_pipeline(task, extractor, policy, net, task.test, opt.runs, cfg.seed);
    emit(dir / "rq3_neural.csv", analysis::point_cloud_csv(res.neural_2d, res.neural), out);
    emit(dir / "rq3_ela.csv", analysis::point_cloud_csv(res.ela_2d, res.ela), out);
    emit(dir / "features_neural.csv", series_csv(res.neural), out);
    emit(dir / "features_ela.csv", series_csv(res.ela), out);
    out << "rq3 " << dir.string() << " exploration " << res.exploration << " exploitation " << res.exploitation
        << " imputed_ela " << res.ela.imputed << '\n';
  } else {
    throw ConfigError("unknown analysis kind '" + opt.kind + "'; expected rq3 or correlation");
  }
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const IntegrityError*>(&e)) return kExitIntegrity;
  return kExitRuntime;
}

}  // namespace ltk::cli
