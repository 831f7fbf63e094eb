#include "ltk/config.hpp"

#include "ltk/checkpoint.hpp"
#include "ltk/error.hpp"
#include "ltk/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <set>

namespace ltk::config {

namespace {

using nlohmann::json;

/// Cursor over one JSON object that tracks which keys were consumed, so that
/// leftovers can be reported as unknown.
class Object {
 public:
  Object(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  std::string field(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }

  const json* get(std::string_view key) {
    seen_.insert(std::string(key));
    const auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  const json& require(std::string_view key) {
    const json* v = get(key);
    if (!v) throw ConfigError("missing required field '" + field(key) + "'");
    return *v;
  }

  template <class T>
  void opt(std::string_view key, T& out) {
    if (const json* v = get(key)) out = as<T>(*v, field(key));
  }

  template <class T>
  T req(std::string_view key) {
    return as<T>(require(key), field(key));
  }

  void finish() const {
    for (const auto& [k, _] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown field '" + field(k) + "'");
    }
  }

  template <class T>
  static T as(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("field '" + where + "' must be a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw ConfigError("field '" + where + "' must be a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("field '" + where + "' must be an integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("field '" + where + "' must be a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("field '" + where + "' must be a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) throw ConfigError("field '" + where + "' must be an array of integers");
      std::vector<int> out;
      for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as<int>(v[i], where + "[" + std::to_string(i) + "]"));
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported field type");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "configuration root" : "field '" + path_ + "'"; }

  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

/// Wraps enum parsers so that their errors carry the field path.
template <class F>
auto parse_enum(Object& o, std::string_view key, F&& parser) -> std::optional<decltype(parser(""))> {
  const json* v = o.get(key);
  if (!v) return std::nullopt;
  const auto s = Object::as<std::string>(*v, o.field(key));
  try {
    return parser(s);
  } catch (const ConfigError& e) {
    throw ConfigError("field '" + o.field(key) + "': " + e.what());
  }
}

void line_column(std::string_view text, std::size_t byte, std::size_t& line, std::size_t& col) {
  line = 1;
  col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
}

analyzer::AnalyzerConfig parse_analyzer(const json& j, const std::string& path) {
  Object o(j, path);
  analyzer::AnalyzerConfig a;
  o.opt("hidden_dim", a.hidden_dim);
  o.opt("num_heads", a.num_heads);
  o.opt("num_layers", a.num_layers);
  o.opt("ff_inner_dim", a.ff_inner_dim);
  o.finish();
  return a;
}

es::EsConfig parse_es(const json& j, const std::string& path) {
  Object o(j, path);
  es::EsConfig e;
  if (auto v = parse_enum(o, "variant", es::parse_variant)) e.variant = *v;
  o.opt("population", e.population);
  o.opt("initial_sigma", e.initial_sigma);
  if (auto v = parse_enum(o, "mean_init", es::parse_mean_init)) e.mean_init = *v;
  if (const json* v = o.get("path_lr")) e.path_lr = Object::as<double>(*v, o.field("path_lr"));
  o.opt("stall_generations", e.stall_generations);
  o.opt("num_paths", e.num_paths);
  o.opt("snapshot_interval", e.snapshot_interval);
  o.finish();
  if (e.population < 4) throw ConfigError("field '" + o.field("population") + "' must be at least 4");
  if (!(e.initial_sigma > 0.0)) throw ConfigError("field '" + o.field("initial_sigma") + "' must be positive");
  return e;
}

metabbo::InnerTrainConfig parse_inner(const json& j, const std::string& path) {
  Object o(j, path);
  metabbo::InnerTrainConfig c;
  if (auto v = parse_enum(o, "variant", es::parse_variant)) c.variant = *v;
  o.opt("population", c.population);
  o.opt("epochs", c.epochs);
  o.opt("sigma", c.sigma);
  o.opt("problems_per_epoch", c.problems_per_epoch);
  o.finish();
  if (c.population < 4) throw ConfigError("field '" + o.field("population") + "' must be at least 4");
  if (c.epochs < 0) throw ConfigError("field '" + o.field("epochs") + "' must be non-negative");
  if (c.problems_per_epoch < 1) throw ConfigError("field '" + o.field("problems_per_epoch") + "' must be positive");
  return c;
}

ProblemSetDecl parse_problems(const json& j, const std::string& path, std::uint64_t default_seed) {
  Object o(j, path);
  ProblemSetDecl p;
  p.dimension = o.req<int>("dimension");
  p.train = o.req<std::vector<int>>("train");
  p.test = o.req<std::vector<int>>("test");
  o.opt("instances", p.instances);
  p.seed = default_seed;
  o.opt("seed", p.seed);
  if (const json* n = o.get("noise")) {
    Object no(*n, o.field("noise"));
    problems::NoiseModel model;
    if (auto k = parse_enum(no, "kind", problems::parse_noise_kind)) model.kind = *k;
    model.level = no.req<double>("level");
    no.finish();
    if (model.level < 0.0) throw ConfigError("field '" + no.field("level") + "' must be non-negative");
    p.noise = model;
  }
  o.finish();
  if (p.dimension < 1) throw ConfigError("field '" + o.field("dimension") + "' must be positive");
  if (p.instances < 1) throw ConfigError("field '" + o.field("instances") + "' must be positive");
  for (const auto* ids : {&p.train, &p.test}) {
    const std::string key = ids == &p.train ? "train" : "test";
    if (ids->empty()) throw ConfigError("field '" + o.field(key) + "' must not be empty");
    for (int id : *ids) {
      if (!problems::is_implemented(id)) {
        throw ConfigError("field '" + o.field(key) + "': unknown function_id " + std::to_string(id));
      }
    }
  }
  return p;
}

TaskDecl parse_task(const json& j, const std::string& path, std::uint64_t run_seed) {
  Object o(j, path);
  TaskDecl t;
  t.id = o.req<std::string>("id");
  if (auto v = parse_enum(o, "optimizer", optimizers::parse_kind)) t.optimizer = *v;
  else throw ConfigError("missing required field '" + o.field("optimizer") + "'");
  if (auto v = parse_enum(o, "feature_mode", metabbo::parse_mode)) t.feature_mode = *v;
  o.opt("population", t.population);
  o.opt("budget", t.budget);
  t.problems = parse_problems(o.require("problems"), o.field("problems"), run_seed);
  if (const json* in = o.get("inner")) t.inner = parse_inner(*in, o.field("inner"));
  t.policy_seed = run_seed;
  o.opt("policy_seed", t.policy_seed);
  o.finish();
  if (t.id.empty()) throw ConfigError("field '" + o.field("id") + "' must not be empty");
  return t;
}

json to_json(const problems::NoiseModel& n) {
  return {{"kind", std::string(problems::noise_kind_name(n.kind))}, {"level", n.level}};
}

}  // namespace

RunConfig parse(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line, col;
    line_column(text, e.byte > 0 ? e.byte - 1 : 0, line, col);
    throw ConfigError("configuration syntax error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
  Object o(root, "");
  RunConfig c;
  c.seed = o.req<std::uint64_t>("seed");
  o.opt("Q", c.Q);
  o.opt("max_gen", c.max_gen);
  o.opt("jobs", c.jobs);
  if (const json* v = o.get("output_root")) c.output_root = Object::as<std::string>(*v, "output_root");
  if (const json* v = o.get("analyzer")) c.analyzer = parse_analyzer(*v, "analyzer");
  if (const json* v = o.get("es")) c.es = parse_es(*v, "es");
  const json& tasks = o.require("tasks");
  if (!tasks.is_array() || tasks.empty()) throw ConfigError("field 'tasks' must be a non-empty array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::string path = "tasks[" + std::to_string(i) + "]";
    c.tasks.push_back(parse_task(tasks[i], path, c.seed));
    if (!ids.insert(c.tasks.back().id).second) {
      throw ConfigError("field '" + path + ".id': duplicate task id '" + c.tasks.back().id + "'");
    }
  }
  o.finish();
  if (c.Q < 1) throw ConfigError("field 'Q' must be at least 1");
  if (c.max_gen < 1) throw ConfigError("field 'max_gen' must be at least 1");
  if (c.jobs < 1) throw ConfigError("field 'jobs' must be at least 1");
  try {
    c.analyzer.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("field 'analyzer': ") + e.what());
  }
  for (std::size_t i = 0; i < c.tasks.size(); ++i) {
    try {
      build_task(c.tasks[i], c.analyzer).validate();
    } catch (const ConfigError& e) {
      throw ConfigError("field 'tasks[" + std::to_string(i) + "]': " + e.what());
    }
  }
  return c;
}

RunConfig load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = checkpoint::read_file(path);
  } catch (const Error& e) {
    throw ConfigError("cannot read configuration '" + path.string() + "': " + e.what());
  }
  return parse(text);
}

std::string resolved(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["Q"] = c.Q;
  j["max_gen"] = c.max_gen;
  j["jobs"] = c.jobs;
  if (c.output_root) j["output_root"] = *c.output_root;
  j["analyzer"] = {{"hidden_dim", c.analyzer.hidden_dim},
                   {"num_heads", c.analyzer.num_heads},
                   {"num_layers", c.analyzer.num_layers},
                   {"ff_inner_dim", c.analyzer.ff_inner_dim}};
  json es = {{"variant", std::string(es::variant_name(c.es.variant))},
             {"population", c.es.population},
             {"initial_sigma", c.es.initial_sigma},
             {"mean_init", std::string(es::mean_init_name(c.es.mean_init))},
             {"stall_generations", c.es.stall_generations},
             {"num_paths", c.es.num_paths},
             {"snapshot_interval", c.es.snapshot_interval}};
  if (c.es.path_lr) es["path_lr"] = *c.es.path_lr;
  j["es"] = es;
  j["tasks"] = json::array();
  for (const auto& t : c.tasks) {
    json p = {{"dimension", t.problems.dimension},
              {"train", t.problems.train},
              {"test", t.problems.test},
              {"instances", t.problems.instances},
              {"seed", t.problems.seed}};
    if (t.problems.noise) p["noise"] = to_json(*t.problems.noise);
    j["tasks"].push_back({{"id", t.id},
                          {"optimizer", std::string(optimizers::kind_name(t.optimizer))},
                          {"feature_mode", std::string(metabbo::mode_name(t.feature_mode))},
                          {"population", t.population},
                          {"budget", t.budget},
                          {"problems", p},
                          {"inner",
                           {{"variant", std::string(es::variant_name(t.inner.variant))},
                            {"population", t.inner.population},
                            {"epochs", t.inner.epochs},
                            {"sigma", t.inner.sigma},
                            {"problems_per_epoch", t.inner.problems_per_epoch}}},
                          {"policy_seed", t.policy_seed}});
  }
  return j.dump(2) + "\n";
}

metabbo::TaskSpec build_task(const TaskDecl& d, const analyzer::AnalyzerConfig& analyzer) {
  metabbo::TaskSpec t;
  t.id = d.id;
  t.optimizer = d.optimizer;
  t.feature_mode = d.feature_mode;
  t.population = d.population;
  t.budget = d.budget;
  t.inner = d.inner;
  t.policy_seed = d.policy_seed;
  t.analyzer_slot = metabbo::AnalyzerSlot::neural;
  t.feature_width = analyzer.hidden_dim;
  const auto instantiate = [&](const std::vector<int>& ids, std::vector<problems::ProblemSpec>& out) {
    for (int id : ids) {
      for (int k = 0; k < d.problems.instances; ++k) {
        const auto seed = mix_seed({d.problems.seed, static_cast<std::uint64_t>(id), static_cast<std::uint64_t>(k)});
        out.push_back(problems::random_spec(id, d.problems.dimension, seed, d.problems.noise));
      }
    }
  };
  instantiate(d.problems.train, t.train);
  instantiate(d.problems.test, t.test);
  return t;
}

trainer::TrainingRun build_run(const RunConfig& c, const std::filesystem::path& output_dir) {
  trainer::TrainingRun run;
  for (const auto& t : c.tasks) run.tasks.push_back(build_task(t, c.analyzer));
  run.analyzer = c.analyzer;
  run.es = c.es;
  run.max_gen = c.max_gen;
  run.Q = c.Q;
  run.seed = c.seed;
  run.output_dir = output_dir;
  run.jobs = c.jobs;
  return run;
}

}  // namespace ltk::config
