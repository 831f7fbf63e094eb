#include "ltk/metabbo.hpp"

#include "ltk/checkpoint.hpp"
#include "ltk/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace ltk::metabbo {

namespace {

using json = nlohmann::json;

constexpr std::uint64_t kEpisodeStream = 0x0e915dULL;
constexpr std::uint64_t kSampleStream = 0x5a3b1eULL;

/// Rows fed to the policy for one step.
Matrix policy_inputs(const Features& f, FeatureMode mode, const Observation& obs, bool native_indiv) {
  if (mode == FeatureMode::population) return f.pop.transpose();
  if (native_indiv) return f.indiv;
  const Eigen::Index m = obs.population(), w = f.pop.size();
  Eigen::Index best;
  obs.y.minCoeff(&best);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return obs.y[a] < obs.y[b]; });
  const double diag = (obs.ub - obs.lb).norm();
  Matrix in(m, w + 2);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const Eigen::Index i = order[r];
    in.row(i).head(w) = f.pop.transpose();
    in(i, w) = static_cast<double>(r) / static_cast<double>(m - 1);
    in(i, w + 1) = (obs.X.row(i) - obs.X.row(best)).norm() / diag;
  }
  return in;
}

std::string population_digest(const Observation& obs) {
  std::vector<double> bits(obs.X.data(), obs.X.data() + obs.X.size());
  bits.insert(bits.end(), obs.y.data(), obs.y.data() + obs.y.size());
  return checkpoint::digest(bits);
}

}  // namespace

std::string_view mode_name(FeatureMode mode) {
  return mode == FeatureMode::population ? "population" : "per_individual";
}

FeatureMode parse_mode(std::string_view name) {
  if (name == "population") return FeatureMode::population;
  if (name == "per_individual") return FeatureMode::per_individual;
  throw ConfigError("unknown feature mode '" + std::string(name) + "' (expected per_individual or population)");
}

MetaPolicy::MetaPolicy(Eigen::Index input_width, std::vector<OutputRange> outputs, int hidden)
    : input_width_(input_width), hidden_(hidden), outputs_(std::move(outputs)) {
  if (input_width < 1 || hidden < 1 || outputs_.empty()) throw ConfigError("policy sizes must be positive");
  params_.assign(parameter_count(input_width, outputs_.size(), hidden), 0.0);
}

std::size_t MetaPolicy::parameter_count(Eigen::Index input_width, std::size_t outputs, int hidden) {
  const auto in = static_cast<std::size_t>(input_width);
  const auto h = static_cast<std::size_t>(hidden);
  return in * h + h + h * outputs + outputs;
}

void MetaPolicy::set_params(std::vector<double> values) {
  if (values.size() != params_.size()) {
    throw ConfigError("policy expects " + std::to_string(params_.size()) + " parameters, got " +
                      std::to_string(values.size()));
  }
  params_ = std::move(values);
}

Matrix MetaPolicy::act(const Matrix& inputs) const {
  if (inputs.cols() != input_width_) {
    throw ConfigError("policy expects feature width " + std::to_string(input_width_) + ", got " +
                      std::to_string(inputs.cols()));
  }
  const Eigen::Index in = input_width_, h = hidden_, out = static_cast<Eigen::Index>(outputs_.size());
  const double* p = params_.data();
  const Eigen::Map<const Matrix> W1(p, in, h);
  const Eigen::Map<const Eigen::RowVectorXd> b1(p + in * h, h);
  const Eigen::Map<const Matrix> W2(p + in * h + h, h, out);
  const Eigen::Map<const Eigen::RowVectorXd> b2(p + in * h + h + h * out, out);
  const Matrix clean = inputs.unaryExpr([](double v) { return std::isfinite(v) ? v : 0.0; });
  const Matrix hidden = ((clean * W1).rowwise() + b1).array().tanh().matrix();
  Matrix z = (hidden * W2).rowwise() + b2;
  for (Eigen::Index c = 0; c < out; ++c) {
    const double lo = outputs_[c].lo, hi = outputs_[c].hi;
    z.col(c) = z.col(c).unaryExpr([lo, hi](double v) { return lo + (hi - lo) / (1.0 + std::exp(-v)); });
  }
  return z;
}

void TaskSpec::validate() const {
  if (id.empty()) throw ConfigError("task id must not be empty");
  if (train.empty()) throw ConfigError("task " + id + ": train problem set is empty");
  if (test.empty()) throw ConfigError("task " + id + ": test problem set is empty");
  if (population < (optimizer == optimizers::Kind::de ? 4 : 2)) {
    throw ConfigError("task " + id + ": population too small for " + std::string(optimizers::kind_name(optimizer)));
  }
  if (budget < population) {
    throw ConfigError("task " + id + ": budget " + std::to_string(budget) + " is below the population size");
  }
  if (optimizer == optimizers::Kind::pso && feature_mode == FeatureMode::per_individual) {
    throw ConfigError("task " + id + ": PSO controls are population-wide; use feature_mode population");
  }
  std::set<int> train_ids;
  for (const auto& p : train) train_ids.insert(p.function_id);
  for (const auto& p : test) {
    if (train_ids.count(p.function_id)) {
      throw ConfigError("task " + id + ": function " + std::to_string(p.function_id) + " is in both train and test sets");
    }
  }
  if (feature_width && *feature_width < 1) throw ConfigError("task " + id + ": feature_width must be positive");
  if (inner.population < 4) throw ConfigError("task " + id + ": inner ES population must be at least 4");
  if (inner.epochs < 0 || inner.problems_per_epoch < 1) throw ConfigError("task " + id + ": invalid inner training sizes");
}

Eigen::Index policy_input_width(const FeatureExtractor& extractor, FeatureMode mode) {
  if (mode == FeatureMode::population || extractor.per_candidate()) return extractor.width();
  return extractor.width() + 2;
}

std::vector<OutputRange> policy_outputs(optimizers::Kind kind) {
  if (kind == optimizers::Kind::de) return {{"F", 0.0, 1.0}, {"Cr", 0.0, 1.0}};
  return {{"w", 0.0, 1.0}, {"c1", 0.0, 4.0}, {"c2", 0.0, 4.0}};
}

MetaPolicy initial_policy(const TaskSpec& task, const FeatureExtractor& extractor) {
  MetaPolicy policy(policy_input_width(extractor, task.feature_mode), policy_outputs(task.optimizer));
  Rng rng(task.policy_seed);
  const auto in = static_cast<std::size_t>(policy.input_width());
  const auto h = static_cast<std::size_t>(policy.hidden());
  const std::size_t out = policy.outputs().size();
  std::vector<double> v(policy.size(), 0.0);
  for (std::size_t k = 0; k < in * h; ++k) v[k] = 0.5 * rng.normal() / std::sqrt(static_cast<double>(in));
  const std::size_t w2 = in * h + h;
  for (std::size_t k = 0; k < h * out; ++k) v[w2 + k] = 0.5 * rng.normal() / std::sqrt(static_cast<double>(h));
  policy.set_params(std::move(v));
  return policy;
}

double EpisodeResult::total_reward() const {
  double s = 0.0;
  for (const auto& r : steps) s += r.reward;
  return s;
}

EpisodeResult run_episode(const TaskSpec& task, const FeatureExtractor& extractor, const MetaPolicy& policy,
                          const problems::ProblemSpec& problem_spec, std::uint64_t seed, const StepObserver& observer) {
  const Eigen::Index expected = policy_input_width(extractor, task.feature_mode);
  if (policy.input_width() != expected) {
    throw ConfigError("task " + task.id + ": policy takes " + std::to_string(policy.input_width()) +
                      " features but the " + std::string(slot_name(extractor.slot())) + " analyzer provides " +
                      std::to_string(expected));
  }
  const int m = task.population;
  if (task.budget < m) throw ConfigError("task " + task.id + ": budget is below the population size");
  problems::ProblemSpec spec = problem_spec;
  spec.seed = mix_seed({problem_spec.seed, seed});
  problems::Problem problem(spec, task.budget + m);
  Rng rng(mix_seed({seed, kEpisodeStream}));

  optimizers::OptimizerState state = optimizers::initialize(problem, m, rng);
  EpisodeResult res;
  res.initial_best = state.best_so_far;
  res.best_history.push_back(state.best_so_far);
  const int T = task.horizon();
  const double scale = std::max(std::abs(res.initial_best), 1e-12);
  const bool native = extractor.per_candidate();

  for (int t = 0; t < T; ++t) {
    const Observation obs = state.observation(problem);
    const StepContext ctx{obs, t, T, res.best_history};
    const Matrix out = policy.act(policy_inputs(extractor.extract(ctx), task.feature_mode, obs, native));
    StepRecord rec;
    rec.digest = population_digest(obs);
    if (observer) observer(t, obs, out);
    const double before = state.best_so_far;
    if (task.optimizer == optimizers::Kind::de) {
      optimizers::DeConfig cfg;
      if (out.rows() == m) {
        cfg.F = out.col(0);
        cfg.Cr = out.col(1);
      } else {
        cfg.F = Vector::Constant(m, out(0, 0));
        cfg.Cr = Vector::Constant(m, out(0, 1));
      }
      rec.config = {cfg.F.mean(), cfg.Cr.mean()};
      optimizers::de_step(state, cfg, problem, rng);
    } else {
      const optimizers::PsoConfig cfg{out(0, 0), out(0, 1), out(0, 2)};
      rec.config = {cfg.w, cfg.c1, cfg.c2};
      optimizers::pso_step(state, cfg, problem, rng);
    }
    rec.reward = std::max(0.0, (before - state.best_so_far) / scale);
    res.steps.push_back(std::move(rec));
    res.best_history.push_back(state.best_so_far);
  }
  res.f_star = state.best_so_far;
  res.fe_total = problem.fe_count();
  res.fe_used = res.fe_total - m;
  return res;
}

SearchResult inner_search(const Vector& init, const InnerTrainConfig& cfg, std::uint64_t seed,
                          const ParamFitness& fitness, const EpochCallback& on_epoch) {
  SearchResult res;
  res.best = init;
  if (cfg.epochs == 0) return res;
  es::EsConfig ec;
  ec.variant = cfg.variant;
  ec.dim = static_cast<int>(init.size());
  ec.population = cfg.population;
  ec.initial_sigma = cfg.sigma;
  ec.initial_mean = init;
  ec.seed = seed;
  es::EsState state = es::es_init(ec);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto cands = es::es_sample(state, cfg.population);
    std::vector<double> fit(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
      fit[i] = fitness(cands[i], epoch);
      if (std::isfinite(fit[i]) && fit[i] > res.best_fitness) {
        res.best_fitness = fit[i];
        res.best = cands[i];
      }
    }
    es::es_update(state, cands, fit);
    res.epoch_best.push_back(res.best_fitness);
    if (on_epoch) on_epoch(epoch, res.best, res.best_fitness);
  }
  return res;
}

double policy_fitness(const TaskSpec& task, const FeatureExtractor& extractor, const MetaPolicy& policy,
                      std::uint64_t train_seed, int epoch, long* fe_used) {
  // The epoch's problems are a without-replacement sample of the train set.
  Rng pick(mix_seed({train_seed, static_cast<std::uint64_t>(epoch), kSampleStream}));
  std::vector<std::size_t> idx(task.train.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t k = std::min(idx.size(), static_cast<std::size_t>(task.inner.problems_per_epoch));
  for (std::size_t j = 0; j < k; ++j) std::swap(idx[j], idx[j + pick.index(idx.size() - j)]);
  std::vector<double> rewards;
  for (std::size_t j = 0; j < k; ++j) {
    const auto seed = mix_seed({train_seed, static_cast<std::uint64_t>(epoch), j});
    const EpisodeResult r = run_episode(task, extractor, policy, task.train[idx[j]], seed);
    rewards.push_back(r.total_reward());
    if (fe_used) *fe_used += r.fe_total;
  }
  return ordered_mean(rewards);
}

MetaTrainResult meta_train(const TaskSpec& task, const FeatureExtractor& extractor, std::uint64_t train_seed,
                           const std::optional<MetaPolicy>& init) {
  task.validate();
  MetaTrainResult res;
  res.policy = init ? *init : initial_policy(task, extractor);
  const std::vector<double>& p0 = res.policy.params();
  const Vector start = Eigen::Map<const Vector>(p0.data(), static_cast<Eigen::Index>(p0.size()));
  MetaPolicy scratch = res.policy;
  const auto fitness = [&](const Vector& params, int epoch) {
    scratch.set_params(std::vector<double>(params.data(), params.data() + params.size()));
    return policy_fitness(task, extractor, scratch, train_seed, epoch, &res.fe_used);
  };
  const SearchResult sr = inner_search(start, task.inner, mix_seed({train_seed, 0x1a2e5ULL}), fitness);
  res.policy.set_params(std::vector<double>(sr.best.data(), sr.best.data() + sr.best.size()));
  res.best_fitness = sr.best_fitness;
  res.epoch_best = sr.epoch_best;
  return res;
}

double z_score(double f_star, double mu, double sigma) {
  if (sigma < kSigmaFloor) {
    if (std::abs(f_star - mu) < kSigmaFloor) return 0.0;
    return mu > f_star ? kZCap : -kZCap;
  }
  const double z = -(f_star - mu) / sigma;
  return z == 0.0 ? 0.0 : z;
}

double ordered_mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double mu = ordered_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::uint64_t task_hash(const std::string& task_id) { return checkpoint::fnv1a(task_id); }

std::uint64_t test_seed(std::uint64_t seed_base, const std::string& task_id, std::size_t problem, int run) {
  return mix_seed({seed_base, task_hash(task_id), static_cast<std::uint64_t>(problem), static_cast<std::uint64_t>(run)});
}

std::vector<std::vector<double>> test_policy(const TaskSpec& task, const FeatureExtractor& extractor,
                                             const MetaPolicy& policy, int Q, std::uint64_t seed_base) {
  std::vector<std::vector<double>> out(task.test.size(), std::vector<double>(static_cast<std::size_t>(Q)));
  for (std::size_t p = 0; p < task.test.size(); ++p) {
    for (int q = 0; q < Q; ++q) {
      out[p][q] = run_episode(task, extractor, policy, task.test[p], test_seed(seed_base, task.id, p, q)).f_star;
    }
  }
  return out;
}

Upsilon upsilon_from(const std::vector<std::vector<double>>& f_star, const BaselineStats& baseline) {
  Upsilon u;
  u.f_star = f_star;
  std::vector<double> per_problem;
  for (std::size_t p = 0; p < f_star.size(); ++p) {
    if (p >= baseline.problems.size()) {
      throw ConfigError("baseline for task " + baseline.task_id + " has no entry for test problem " + std::to_string(p));
    }
    const ProblemStats& st = baseline.problems[p];
    std::vector<double> z;
    for (double f : f_star[p]) z.push_back(z_score(f, st.mu, st.sigma));
    per_problem.push_back(st.sigma >= kSigmaFloor ? z_score(ordered_mean(f_star[p]), st.mu, st.sigma) : ordered_mean(z));
    u.z.push_back(std::move(z));
  }
  u.value = ordered_mean(per_problem);
  return u;
}

RelativeResult relative_performance(const TaskSpec& task, const FeatureExtractor& extractor,
                                    const BaselineStats& baseline, std::uint64_t train_seed) {
  if (baseline.problems.size() < task.test.size()) {
    const std::size_t missing = baseline.problems.size();
    throw ConfigError("baseline for task " + task.id + " does not cover test problem " + std::to_string(missing) +
                      " (function " + std::to_string(task.test[missing].function_id) + ")");
  }
  RelativeResult res;
  MetaTrainResult mt = meta_train(task, extractor, train_seed);
  res.policy = std::move(mt.policy);
  const auto f = test_policy(task, extractor, res.policy, baseline.Q, baseline.seed_base);
  res.upsilon = upsilon_from(f, baseline);
  res.fe_used = mt.fe_used + static_cast<long>(task.test.size()) * baseline.Q * (task.budget + task.population);
  res.upsilon.fe_used = res.fe_used;
  return res;
}

std::string BaselineStats::key() const {
  return task_id + "|Q=" + std::to_string(Q) + "|seed=" + std::to_string(seed_base) + "|train=" +
         std::to_string(train_seed) + "|task=" + std::to_string(task_fingerprint);
}

std::uint64_t fingerprint(const TaskSpec& task) {
  json j;
  j["id"] = task.id;
  j["optimizer"] = optimizers::kind_name(task.optimizer);
  j["mode"] = mode_name(task.feature_mode);
  j["population"] = task.population;
  j["budget"] = task.budget;
  j["policy_seed"] = task.policy_seed;
  j["inner"] = {es::variant_name(task.inner.variant), task.inner.population, task.inner.epochs, task.inner.sigma,
                task.inner.problems_per_epoch};
  for (const auto* set : {&task.train, &task.test}) {
    json arr = json::array();
    for (const auto& p : *set) {
      json e = {{"f", p.function_id}, {"d", p.dimension}, {"o", p.offset}, {"s", p.seed}};
      if (p.noise) e["n"] = {problems::noise_kind_name(p.noise->kind), p.noise->level};
      arr.push_back(e);
    }
    j[set == &task.train ? "train" : "test"] = arr;
  }
  const auto bytes = json::to_cbor(j);
  return checkpoint::fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::string BaselineStats::to_json() const {
  json j;
  j["task_id"] = task_id;
  j["Q"] = Q;
  j["seed_base"] = seed_base;
  j["train_seed"] = train_seed;
  j["task_fingerprint"] = task_fingerprint;
  j["problems"] = json::array();
  for (const auto& p : problems) {
    j["problems"].push_back({{"function_id", p.function_id}, {"mu", p.mu}, {"sigma", p.sigma}, {"f_star", p.f_star}});
  }
  return j.dump(2);
}

BaselineStats BaselineStats::from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    BaselineStats b;
    b.task_id = j.at("task_id").get<std::string>();
    b.Q = j.at("Q").get<int>();
    b.seed_base = j.at("seed_base").get<std::uint64_t>();
    b.train_seed = j.at("train_seed").get<std::uint64_t>();
    b.task_fingerprint = j.at("task_fingerprint").get<std::uint64_t>();
    for (const auto& p : j.at("problems")) {
      b.problems.push_back({p.at("function_id").get<int>(), p.at("mu").get<double>(), p.at("sigma").get<double>(),
                            p.at("f_star").get<std::vector<double>>()});
    }
    return b;
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("malformed baseline cache: ") + e.what());
  }
}

}  // namespace ltk::metabbo
