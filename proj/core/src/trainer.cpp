#include "ltk/trainer.hpp"

#include "ltk/error.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace ltk::trainer {

namespace fs = std::filesystem;

namespace {

using json = nlohmann::json;

constexpr char kStateMagic[8] = {'L', 'T', 'K', 'S', 'T', 'A', 'T', 'E'};

struct LoopState {
  es::EsState es;
  std::vector<double> theta_star;
  double best_fitness = -std::numeric_limits<double>::infinity();
  std::vector<GenerationRecord> history;
};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

json record_json(const GenerationRecord& r) {
  return {{"generation", r.generation}, {"fitness", r.fitness},       {"generation_best", r.generation_best},
          {"best_so_far", r.best_so_far}, {"best_digest", r.best_digest}, {"sigma", r.sigma},
          {"fe", r.fe},                 {"wall_seconds", r.wall_seconds}};
}

GenerationRecord json_record(const json& j) {
  GenerationRecord r;
  r.generation = j.at("generation").get<int>();
  r.fitness = j.at("fitness").get<std::vector<double>>();
  r.generation_best = j.at("generation_best").get<double>();
  r.best_so_far = j.at("best_so_far").get<double>();
  r.best_digest = j.at("best_digest").get<std::string>();
  r.sigma = j.at("sigma").get<double>();
  r.fe = j.at("fe").get<long>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  return r;
}

std::string encode_state(const LoopState& st, std::uint64_t run_seed) {
  json j;
  const std::string es_bytes = es::to_cbor(st.es);
  j["es"] = json::binary(std::vector<std::uint8_t>(es_bytes.begin(), es_bytes.end()));
  j["run_seed"] = run_seed;
  j["theta_star"] = st.theta_star;
  j["best_fitness"] = std::isfinite(st.best_fitness) ? json(st.best_fitness) : json(nullptr);
  j["history"] = json::array();
  for (const auto& r : st.history) j["history"].push_back(record_json(r));
  const auto body = json::to_cbor(j);
  std::string out(kStateMagic, sizeof kStateMagic);
  put_u64(out, body.size());
  out.append(reinterpret_cast<const char*>(body.data()), body.size());
  put_u64(out, checkpoint::fnv1a(out));
  return out;
}

LoopState decode_state(std::string_view bytes, std::uint64_t run_seed) {
  if (bytes.size() < 24 || std::memcmp(bytes.data(), kStateMagic, sizeof kStateMagic) != 0) {
    throw IntegrityError("training state file has a bad header");
  }
  if (checkpoint::fnv1a(bytes.substr(0, bytes.size() - 8)) != get_u64(bytes, bytes.size() - 8)) {
    throw IntegrityError("training state checksum mismatch");
  }
  const std::uint64_t len = get_u64(bytes, 8);
  if (16 + len + 8 != bytes.size()) throw IntegrityError("training state length mismatch");
  try {
    const json j = json::from_cbor(bytes.substr(16, len));
    if (j.at("run_seed").get<std::uint64_t>() != run_seed) {
      throw IntegrityError("training state belongs to a run with a different seed");
    }
    LoopState st;
    const auto& bin = j.at("es").get_binary();
    st.es = es::from_cbor(std::string_view(reinterpret_cast<const char*>(bin.data()), bin.size()));
    st.theta_star = j.at("theta_star").get<std::vector<double>>();
    if (!j.at("best_fitness").is_null()) st.best_fitness = j.at("best_fitness").get<double>();
    for (const auto& r : j.at("history")) st.history.push_back(json_record(r));
    return st;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed training state: ") + e.what());
  }
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Upsilon of one (candidate, task) pipeline, with the task id attached to errors.
metabbo::RelativeResult pipeline(std::span<const double> theta, const TrainingRun& run,
                                 const metabbo::BaselineStats& baseline, const metabbo::TaskSpec& task,
                                 int generation) {
  try {
    const metabbo::NeuralExtractor ex(analyzer::decode_params(theta, run.analyzer));
    return metabbo::relative_performance(task, ex, baseline, candidate_train_seed(run.seed, generation, task.id));
  } catch (const ConfigError& e) {
    throw ConfigError("task " + task.id + ": " + e.what());
  } catch (const Error& e) {
    throw Error("task " + task.id + ": " + e.what());
  }
}

checkpoint::AnalyzerCheckpoint make_checkpoint(const TrainingRun& run, const LoopState& st, int generation) {
  checkpoint::AnalyzerCheckpoint c;
  c.config = run.analyzer;
  c.values = st.theta_star;
  c.provenance.generation = generation;
  c.provenance.seed = run.seed;
  if (std::isfinite(st.best_fitness)) c.provenance.fitness = st.best_fitness;
  c.provenance.source = "train";
  return c;
}

}  // namespace

void TrainingRun::validate() const {
  if (tasks.empty()) throw ConfigError("training needs at least one task");
  analyzer.validate();
  for (const auto& t : tasks) {
    t.validate();
    if (t.analyzer_slot != metabbo::AnalyzerSlot::neural) {
      throw ConfigError("task " + t.id + ": training requires the neural analyzer slot");
    }
    if (t.feature_width && *t.feature_width != analyzer.hidden_dim) {
      throw ConfigError("task " + t.id + ": feature_width " + std::to_string(*t.feature_width) +
                        " differs from the analyzer hidden_dim " + std::to_string(analyzer.hidden_dim));
    }
  }
  for (std::size_t a = 0; a < tasks.size(); ++a) {
    for (std::size_t b = a + 1; b < tasks.size(); ++b) {
      if (tasks[a].id == tasks[b].id) throw ConfigError("duplicate task id " + tasks[a].id);
    }
  }
  if (max_gen < 0) throw ConfigError("max_gen must be non-negative");
  if (Q < 1) throw ConfigError("Q must be at least 1");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  es::EsConfig probe = es;
  probe.dim = 1;
  probe.validate();
}

std::uint64_t baseline_train_seed(std::uint64_t run_seed, const std::string& task_id) {
  return mix_seed({run_seed, metabbo::task_hash(task_id), 0xba5e1ULL});
}

std::uint64_t test_seed_base(std::uint64_t run_seed) { return mix_seed({run_seed, 0x7e57ULL}); }

std::uint64_t candidate_train_seed(std::uint64_t run_seed, int generation, const std::string& task_id) {
  return mix_seed({run_seed, static_cast<std::uint64_t>(generation), metabbo::task_hash(task_id)});
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  {
    std::vector<std::jthread> workers;
    const auto width = std::min<std::size_t>(n, static_cast<std::size_t>(jobs));
    for (std::size_t w = 0; w < width; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!first) first = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (first) std::rethrow_exception(first);
}

std::vector<metabbo::BaselineStats> compute_baselines(const std::vector<metabbo::TaskSpec>& tasks, int Q,
                                                      std::uint64_t run_seed,
                                                      const std::optional<fs::path>& cache_dir, long* fe_used,
                                                      int jobs) {
  std::vector<metabbo::BaselineStats> out(tasks.size());
  std::vector<long> spent(tasks.size(), 0);
  parallel_for(tasks.size(), jobs, [&](std::size_t k) {
    const auto& task = tasks[k];
    task.validate();
    metabbo::BaselineStats want;
    want.task_id = task.id;
    want.Q = Q;
    want.seed_base = test_seed_base(run_seed);
    want.train_seed = baseline_train_seed(run_seed, task.id);
    want.task_fingerprint = metabbo::fingerprint(task);
    std::optional<fs::path> file;
    if (cache_dir) file = *cache_dir / (task.id + ".json");
    if (file && fs::exists(*file)) {
      auto cached = metabbo::BaselineStats::from_json(checkpoint::read_file(*file));
      if (cached.key() == want.key() && cached.problems.size() == task.test.size()) {
        out[k] = std::move(cached);
        return;
      }
      spdlog::info("baseline cache for task {} is stale, recomputing", task.id);
    }
    const metabbo::HandcraftedExtractor ex;
    const auto mt = metabbo::meta_train(task, ex, want.train_seed);
    const auto f = metabbo::test_policy(task, ex, mt.policy, Q, want.seed_base);
    for (std::size_t p = 0; p < f.size(); ++p) {
      want.problems.push_back({task.test[p].function_id, metabbo::ordered_mean(f[p]), metabbo::population_std(f[p]), f[p]});
    }
    spent[k] = mt.fe_used + static_cast<long>(task.test.size()) * Q * (task.budget + task.population);
    if (file) checkpoint::write_file_atomic(*file, want.to_json());
    out[k] = std::move(want);
  });
  if (fe_used) *fe_used = std::accumulate(spent.begin(), spent.end(), 0L);
  return out;
}

double fitness(std::span<const double> theta, const TrainingRun& run,
               const std::vector<metabbo::BaselineStats>& baselines, int generation, long* fe_used) {
  if (baselines.size() != run.tasks.size()) throw ConfigError("baselines do not cover every task");
  std::vector<double> ups;
  for (std::size_t k = 0; k < run.tasks.size(); ++k) {
    const auto r = pipeline(theta, run, baselines[k], run.tasks[k], generation);
    ups.push_back(r.upsilon.value);
    if (fe_used) *fe_used += r.fe_used;
  }
  return metabbo::ordered_mean(ups);
}

TrainResult train(const TrainingRun& run, bool resume) {
  run.validate();
  const fs::path out = run.output_dir;
  fs::create_directories(out / "checkpoints");
  const fs::path state_file = out / "state.bin";

  es::EsConfig ec = run.es;
  ec.dim = static_cast<int>(analyzer::parameter_count(run.analyzer));
  ec.seed = mix_seed({run.seed, 0xe5ULL});

  long baseline_fe = 0;
  const auto baselines = compute_baselines(run.tasks, run.Q, run.seed, out / "baselines", &baseline_fe, run.jobs);

  LoopState st;
  if (resume && fs::exists(state_file)) {
    st = decode_state(checkpoint::read_file(state_file), run.seed);
    if (st.es.cfg.dim != ec.dim) throw IntegrityError("training state was written for a different analyzer size");
    spdlog::info("resuming after generation {}", st.history.size());
  } else {
    st.es = es::es_init(ec);
  }

  const std::size_t K = run.tasks.size();
  const int N = ec.population;
  for (int g = static_cast<int>(st.history.size()); g < run.max_gen; ++g) {
    if (run.halt_after && g >= *run.halt_after) break;
    const auto t0 = std::chrono::steady_clock::now();
    const auto cands = es::es_sample(st.es, N);
    std::vector<double> ups(static_cast<std::size_t>(N) * K);
    std::vector<long> fe(ups.size(), 0);
    parallel_for(ups.size(), run.jobs, [&](std::size_t idx) {
      const std::size_t i = idx / K, k = idx % K;
      const auto r = pipeline(std::span<const double>(cands[i].data(), static_cast<std::size_t>(cands[i].size())), run,
                              baselines[k], run.tasks[k], g);
      ups[idx] = r.upsilon.value;
      fe[idx] = r.fe_used;
    });

    GenerationRecord rec;
    rec.generation = g;
    rec.generation_best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < N; ++i) {
      std::vector<double> per_task(ups.begin() + static_cast<std::ptrdiff_t>(i * K),
                                   ups.begin() + static_cast<std::ptrdiff_t>((i + 1) * K));
      const double f = metabbo::ordered_mean(per_task);
      rec.fitness.push_back(f);
      rec.generation_best = std::max(rec.generation_best, f);
      if (f > st.best_fitness) {
        st.best_fitness = f;
        st.theta_star.assign(cands[i].data(), cands[i].data() + cands[i].size());
      }
    }
    for (long f : fe) rec.fe += f;
    es::es_update(st.es, cands, rec.fitness);
    rec.best_so_far = st.best_fitness;
    rec.best_digest = checkpoint::digest(st.theta_star);
    rec.sigma = st.es.sigma;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    st.history.push_back(rec);

    char name[32];
    std::snprintf(name, sizeof name, "gen_%04d.ltk", g);
    checkpoint::write(out / "checkpoints" / name, make_checkpoint(run, st, g));
    checkpoint::write_file_atomic(state_file, encode_state(st, run.seed));
    checkpoint::write_file_atomic(out / "history.csv", history_csv(st.history));
    checkpoint::write_file_atomic(out / "timing.csv", timing_csv(st.history));
    spdlog::info("generation {}: best {:.6g}, best so far {:.6g}, sigma {:.4g}", g, rec.generation_best,
                 rec.best_so_far, rec.sigma);
  }

  TrainResult res;
  res.theta_star = st.theta_star;
  res.best_fitness = st.best_fitness;
  res.history = st.history;
  res.completed = static_cast<int>(st.history.size()) >= run.max_gen;
  if (res.completed && !st.theta_star.empty()) {
    checkpoint::write(out / "best.ltk", make_checkpoint(run, st, static_cast<int>(st.history.size()) - 1));
  }
  return res;
}

std::string history_csv(const std::vector<GenerationRecord>& history) {
  std::ostringstream os;
  os << "generation,generation_best,best_so_far,sigma,fe,best_digest,fitness\n";
  for (const auto& r : history) {
    os << r.generation << ',' << fmt_double(r.generation_best) << ',' << fmt_double(r.best_so_far) << ','
       << fmt_double(r.sigma) << ',' << r.fe << ',' << r.best_digest << ',';
    for (std::size_t i = 0; i < r.fitness.size(); ++i) os << (i ? ";" : "") << fmt_double(r.fitness[i]);
    os << '\n';
  }
  return os.str();
}

std::string timing_csv(const std::vector<GenerationRecord>& history) {
  std::ostringstream os;
  os << "generation,wall_seconds\n";
  for (const auto& r : history) os << r.generation << ',' << fmt_double(r.wall_seconds) << '\n';
  return os.str();
}

EvalMode parse_eval_mode(std::string_view name) {
  if (name == "zero_shot") return EvalMode::zero_shot;
  if (name == "fine_tune") return EvalMode::fine_tune;
  throw ConfigError("unknown evaluation mode '" + std::string(name) + "' (expected zero_shot or fine_tune)");
}

EvaluationReport evaluate(const checkpoint::AnalyzerCheckpoint& ckpt, const metabbo::TaskSpec& task,
                          const metabbo::BaselineStats& baseline, EvalMode mode, int fine_tune_epochs,
                          std::uint64_t seed) {
  task.validate();
  if (task.feature_width && *task.feature_width != ckpt.config.hidden_dim) {
    throw ConfigError("task " + task.id + " expects feature width " + std::to_string(*task.feature_width) +
                      " but the checkpoint analyzer produces " + std::to_string(ckpt.config.hidden_dim));
  }
  const analyzer::Network net = analyzer::decode_params(ckpt.values, ckpt.config);
  const metabbo::NeuralExtractor frozen(net);
  const std::uint64_t train_seed = mix_seed({seed, metabbo::task_hash(task.id), 0x2e50ULL});

  EvaluationReport rep;
  rep.mode = mode;
  const auto zs = metabbo::meta_train(task, frozen, train_seed);
  rep.final = metabbo::upsilon_from(metabbo::test_policy(task, frozen, zs.policy, baseline.Q, baseline.seed_base), baseline);
  rep.upsilon.push_back(rep.final.value);
  rep.best_so_far.push_back(rep.final.value);
  if (mode == EvalMode::zero_shot || fine_tune_epochs <= 0) return rep;

  // Joint vector: analyser parameters followed by policy parameters.
  const std::size_t n_theta = ckpt.values.size();
  Vector start(static_cast<Eigen::Index>(n_theta + zs.policy.size()));
  std::copy(ckpt.values.begin(), ckpt.values.end(), start.data());
  std::copy(zs.policy.params().begin(), zs.policy.params().end(), start.data() + n_theta);

  const auto split = [&](const Vector& joint) {
    metabbo::NeuralExtractor ex(analyzer::decode_params(std::span<const double>(joint.data(), n_theta), ckpt.config));
    metabbo::MetaPolicy pol = zs.policy;
    pol.set_params(std::vector<double>(joint.data() + n_theta, joint.data() + joint.size()));
    return std::pair{std::move(ex), std::move(pol)};
  };
  const std::uint64_t joint_seed = mix_seed({train_seed, 0xf1eULL});
  const auto fit = [&](const Vector& joint, int epoch) {
    const auto [ex, pol] = split(joint);
    return metabbo::policy_fitness(task, ex, pol, joint_seed, epoch);
  };
  Vector last_scored = start;
  double last_upsilon = rep.final.value;
  metabbo::Upsilon last_report = rep.final;
  const auto on_epoch = [&](int, const Vector& best, double) {
    if (best.size() != last_scored.size() || best != last_scored) {
      const auto [ex, pol] = split(best);
      last_report = metabbo::upsilon_from(metabbo::test_policy(task, ex, pol, baseline.Q, baseline.seed_base), baseline);
      last_upsilon = last_report.value;
      last_scored = best;
    }
    rep.upsilon.push_back(last_upsilon);
    if (last_upsilon > rep.best_so_far.back()) {
      rep.best_so_far.push_back(last_upsilon);
      rep.final = last_report;
    } else {
      rep.best_so_far.push_back(rep.best_so_far.back());
    }
  };
  metabbo::InnerTrainConfig jc = task.inner;
  jc.epochs = fine_tune_epochs;
  metabbo::inner_search(start, jc, joint_seed, fit, on_epoch);
  return rep;
}

}  // namespace ltk::trainer
