#include "ltk/es.hpp"

#include "ltk/error.hpp"

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace ltk::es {

namespace {

using json = nlohmann::json;

constexpr double kSuccessRate = 0.3;   // c_s
constexpr double kTargetRatio = 0.3;   // q*
constexpr double kSigmaDamping = 1.0;  // d_sigma

double mu_eff(const std::vector<double>& w) {
  double s = 0.0;
  for (double x : w) s += x * x;
  return 1.0 / s;
}

double chi_n(double D) { return std::sqrt(D) * (1.0 - 1.0 / (4.0 * D) + 1.0 / (21.0 * D * D)); }

double low_rank_path_lr(const EsState& s) { return s.cfg.path_lr.value_or(2.0 / (s.cfg.dim + 5.0)); }
double low_rank_cov_lr(const EsState& s) { return 1.0 / (3.0 * std::sqrt(static_cast<double>(s.cfg.dim)) + 5.0); }

int path_interval(const EsConfig& cfg) { return cfg.snapshot_interval > 0 ? cfg.snapshot_interval : cfg.population; }

struct CmaRates {
  double cs, ds, cc, c1, cmu;
};

CmaRates cma_rates(const EsState& s, double mueff) {
  const double D = s.cfg.dim;
  CmaRates r;
  r.cs = (mueff + 2.0) / (D + mueff + 5.0);
  r.ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (D + 1.0)) - 1.0) + r.cs;
  r.cc = s.cfg.path_lr.value_or((4.0 + mueff / D) / (D + 4.0 + 2.0 * mueff / D));
  r.c1 = 2.0 / ((D + 1.3) * (D + 1.3) + mueff);
  r.cmu = std::min(1.0 - r.c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((D + 2.0) * (D + 2.0) + mueff));
  if (s.cfg.variant == Variant::sep_cmaes) {
    const double scale = (D + 2.0) / 3.0;
    r.c1 = std::min(1.0, r.c1 * scale);
    r.cmu = std::min(1.0 - r.c1, r.cmu * scale);
  }
  return r;
}

void decompose(EsState& s) {
  s.C = 0.5 * (s.C + s.C.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s.C);
  Vector values = eig.eigenvalues();
  const double top = values.cwiseAbs().maxCoeff();
  if (eig.info() != Eigen::Success || !values.allFinite() || values.minCoeff() <= 1e-14 * std::max(top, 1.0)) {
    const double load = std::max(1e-10 * std::max(top, 1.0), -values.minCoeff() + 1e-10);
    if (!s.C.allFinite()) s.C = Eigen::MatrixXd::Identity(s.cfg.dim, s.cfg.dim);
    s.C.diagonal().array() += std::isfinite(load) ? load : 1e-10;
    ++s.loading_events;
    spdlog::warn("covariance not positive definite at generation {}, diagonal loading applied", s.generation);
    eig.compute(s.C);
    values = eig.eigenvalues().cwiseMax(1e-300);
  }
  s.B = eig.eigenvectors();
  s.eig_sqrt = values.cwiseSqrt();
  s.eigen_generation = s.generation;
}

/// Weighted rank gain of this generation's parents over the previous one's.
double rank_gain(const std::vector<double>& prev, const std::vector<double>& cur, const std::vector<double>& w) {
  const std::size_t mu = cur.size();
  std::vector<double> all(prev);
  all.insert(all.end(), cur.begin(), cur.end());
  for (double& v : all) {
    if (!std::isfinite(v)) v = -std::numeric_limits<double>::infinity();
  }
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return all[a] > all[b]; });
  std::vector<double> rank(all.size());
  for (std::size_t r = 0; r < idx.size(); ++r) rank[idx[r]] = static_cast<double>(r);
  double q = 0.0;
  for (std::size_t i = 0; i < mu; ++i) q += w[i] * (rank[i] - rank[mu + i]);
  return q / static_cast<double>(mu);
}

void success_rule(EsState& s, const std::vector<double>& parents, const std::vector<double>& w) {
  if (s.prev_parent_fitness.size() == parents.size()) {
    const double q = rank_gain(s.prev_parent_fitness, parents, w);
    s.success = (1.0 - kSuccessRate) * s.success + kSuccessRate * (q - kTargetRatio);
    s.sigma *= std::exp(s.success / kSigmaDamping);
  }
  s.prev_parent_fitness = parents;
}

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Eigen::MatrixXd json_mat(const json& j) {
  const auto v = j.at("data").get<std::vector<double>>();
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
}

}  // namespace

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::cmaes: return "cmaes";
    case Variant::sep_cmaes: return "sep_cmaes";
    case Variant::fast_cmaes: return "fast_cmaes";
    case Variant::r1es: return "r1es";
    case Variant::rmes: return "rmes";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::cmaes, Variant::sep_cmaes, Variant::fast_cmaes, Variant::r1es, Variant::rmes}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown ES variant '" + std::string(name) + "'");
}

std::string_view mean_init_name(MeanInit m) { return m == MeanInit::zero ? "zero" : "uniform_random"; }

MeanInit parse_mean_init(std::string_view name) {
  if (name == "zero") return MeanInit::zero;
  if (name == "uniform_random" || name == "random") return MeanInit::uniform_random;
  throw ConfigError("unknown initial mean mode '" + std::string(name) + "'");
}

void EsConfig::validate() const {
  if (dim < 1) throw ConfigError("ES dimension must be positive");
  if (population < 4) throw ConfigError("ES population must be at least 4, got " + std::to_string(population));
  if (!(initial_sigma > 0.0) || !std::isfinite(initial_sigma)) throw ConfigError("ES initial sigma must be positive");
  if (path_lr && !(*path_lr > 0.0 && *path_lr <= 1.0)) throw ConfigError("ES path learning rate must lie in (0, 1]");
  if (num_paths < 1) throw ConfigError("rmes needs at least one path");
  if (stall_generations < 1) throw ConfigError("stall_generations must be positive");
  if (initial_mean && initial_mean->size() != dim) throw ConfigError("initial mean length differs from ES dimension");
}

std::vector<double> recombination_weights(int n) {
  const int mu = n / 2;
  std::vector<double> w(static_cast<std::size_t>(mu));
  for (int i = 0; i < mu; ++i) w[i] = std::log(n / 2.0 + 0.5) - std::log(i + 1.0);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= total;
  return w;
}

std::vector<std::size_t> rank_order(const std::vector<double>& fitness) {
  std::vector<std::size_t> idx(fitness.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const bool fa = std::isfinite(fitness[a]), fb = std::isfinite(fitness[b]);
    if (fa != fb) return fa;
    return fa && fitness[a] > fitness[b];
  });
  return idx;
}

EsState es_init(const EsConfig& cfg) {
  cfg.validate();
  EsState s;
  s.cfg = cfg;
  s.rng = Rng(cfg.seed);
  const Eigen::Index D = cfg.dim;
  if (cfg.initial_mean) {
    s.mean = *cfg.initial_mean;
  } else if (cfg.mean_init == MeanInit::zero) {
    s.mean = Vector::Zero(D);
  } else {
    s.mean.resize(D);
    for (Eigen::Index k = 0; k < D; ++k) s.mean[k] = s.rng.uniform(-1.0, 1.0);
  }
  s.sigma = cfg.initial_sigma;
  switch (cfg.variant) {
    case Variant::cmaes:
      s.C = Eigen::MatrixXd::Identity(D, D);
      s.B = Eigen::MatrixXd::Identity(D, D);
      s.eig_sqrt = Vector::Ones(D);
      s.eigen_generation = 0;
      s.pc = s.ps = Vector::Zero(D);
      break;
    case Variant::sep_cmaes:
      s.diag = Vector::Ones(D);
      s.pc = s.ps = Vector::Zero(D);
      break;
    case Variant::fast_cmaes:
      s.paths = {Vector::Zero(D), Vector::Zero(D)};
      break;
    case Variant::r1es:
      s.paths = {Vector::Zero(D)};
      break;
    case Variant::rmes:
      s.evo_path = Vector::Zero(D);
      break;
  }
  s.best_x = s.mean;
  return s;
}

std::vector<Vector> es_sample(EsState& s, int n) {
  const Eigen::Index D = s.cfg.dim;
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(n));
  const double ccov = low_rank_cov_lr(s);
  const double a = std::sqrt(1.0 - ccov), b = std::sqrt(ccov);
  for (int i = 0; i < n; ++i) {
    Vector z(D);
    for (Eigen::Index k = 0; k < D; ++k) z[k] = s.rng.normal();
    Vector step;
    switch (s.cfg.variant) {
      case Variant::cmaes:
        step = s.B * s.eig_sqrt.cwiseProduct(z);
        break;
      case Variant::sep_cmaes:
        step = s.diag.cwiseSqrt().cwiseProduct(z);
        break;
      case Variant::r1es: {
        const double r = s.rng.normal();
        step = a * z + b * r * s.paths[0];
        break;
      }
      case Variant::fast_cmaes: {
        const double r1 = s.rng.normal();
        const double r2 = s.rng.normal();
        step = a * z + b * (r1 * s.paths[0] + r2 * s.paths[1]);
        break;
      }
      case Variant::rmes: {
        // a^k z + sum_i b a^(k - i) r_i p_i with paths oldest first.
        const auto k = static_cast<int>(s.paths.size());
        step = std::pow(a, k) * z;
        for (int j = 0; j < k; ++j) step += b * std::pow(a, k - 1 - j) * s.rng.normal() * s.paths[j];
        break;
      }
    }
    out.push_back(s.mean + s.sigma * step);
  }
  return out;
}

void es_update(EsState& s, const std::vector<Vector>& candidates, const std::vector<double>& fitness) {
  if (candidates.size() != fitness.size() || candidates.size() < 4) {
    throw ConfigError("es_update needs matching candidate and fitness lists of size >= 4");
  }
  const Eigen::Index D = s.cfg.dim;
  for (const auto& c : candidates) {
    if (c.size() != D) throw ConfigError("candidate length differs from ES dimension");
  }
  const auto bad = std::count_if(fitness.begin(), fitness.end(), [](double f) { return !std::isfinite(f); });
  if (bad > 0) spdlog::warn("{} non-finite fitness values ranked last at generation {}", bad, s.generation);

  const auto n = static_cast<int>(candidates.size());
  s.evaluations += n;
  const auto order = rank_order(fitness);
  const double top = fitness[order[0]];
  if (std::isfinite(top) && top > s.best_f) {
    s.best_f = top;
    s.best_x = candidates[order[0]];
    s.stall_count = 0;
  } else {
    ++s.stall_count;
  }
  if (s.stall_count >= s.cfg.stall_generations) s.stalled = true;

  const auto w = recombination_weights(n);
  const std::size_t mu = w.size();
  const double mueff = mu_eff(w);
  const Vector old_mean = s.mean;
  Vector new_mean = Vector::Zero(D);
  for (std::size_t i = 0; i < mu; ++i) new_mean += w[i] * candidates[order[i]];
  const Vector yw = (new_mean - old_mean) / s.sigma;
  s.mean = new_mean;

  bool refresh_eigen = false;
  if (s.cfg.variant == Variant::cmaes || s.cfg.variant == Variant::sep_cmaes) {
    const CmaRates r = cma_rates(s, mueff);
    const double Dd = static_cast<double>(D);
    Vector whitened;
    if (s.cfg.variant == Variant::cmaes) {
      whitened = s.B * (s.B.transpose() * yw).cwiseQuotient(s.eig_sqrt);
    } else {
      whitened = yw.cwiseQuotient(s.diag.cwiseSqrt());
    }
    s.ps = (1.0 - r.cs) * s.ps + std::sqrt(r.cs * (2.0 - r.cs) * mueff) * whitened;
    const double ps_norm = s.ps.norm();
    const double norm_corr = std::sqrt(1.0 - std::pow(1.0 - r.cs, 2.0 * static_cast<double>(s.generation + 1)));
    const bool hsig = ps_norm / norm_corr / chi_n(Dd) < 1.4 + 2.0 / (Dd + 1.0);
    s.pc = (1.0 - r.cc) * s.pc + (hsig ? std::sqrt(r.cc * (2.0 - r.cc) * mueff) : 0.0) * yw;
    const double lost = hsig ? 0.0 : r.cc * (2.0 - r.cc);

    if (s.cfg.variant == Variant::cmaes) {
      Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(D, D);
      for (std::size_t i = 0; i < mu; ++i) {
        const Vector yi = (candidates[order[i]] - old_mean) / s.sigma;
        rank_mu.selfadjointView<Eigen::Lower>().rankUpdate(yi, w[i]);
      }
      rank_mu = rank_mu.selfadjointView<Eigen::Lower>();
      s.C = (1.0 - r.c1 - r.cmu) * s.C + r.c1 * (s.pc * s.pc.transpose() + lost * s.C) + r.cmu * rank_mu;
    } else {
      Vector rank_mu = Vector::Zero(D);
      for (std::size_t i = 0; i < mu; ++i) {
        const Vector yi = (candidates[order[i]] - old_mean) / s.sigma;
        rank_mu += w[i] * yi.cwiseAbs2();
      }
      s.diag = (1.0 - r.c1 - r.cmu) * s.diag + r.c1 * (s.pc.cwiseAbs2() + lost * s.diag) + r.cmu * rank_mu;
      if (!s.diag.allFinite() || s.diag.minCoeff() <= 0.0) {
        s.diag = s.diag.unaryExpr([](double v) { return std::isfinite(v) && v > 1e-300 ? v : 1e-10; });
        ++s.loading_events;
        spdlog::warn("diagonal covariance lost positivity at generation {}, entries reset", s.generation);
      }
    }
    s.sigma *= std::exp((r.cs / r.ds) * (ps_norm / chi_n(Dd) - 1.0));

    if (s.cfg.variant == Variant::cmaes) {
      const double gap = std::max(1.0, std::floor(1.0 / (10.0 * Dd * (r.c1 + r.cmu))));
      refresh_eigen = static_cast<double>(s.generation + 1 - s.eigen_generation) >= gap;
    }
  } else {
    const double c = low_rank_path_lr(s);
    const double gain = std::sqrt(c * (2.0 - c) * mueff);
    Vector& p = s.cfg.variant == Variant::rmes ? s.evo_path : s.paths[0];
    p = (1.0 - c) * p + gain * yw;
    const long next = s.generation + 1;
    const int interval = path_interval(s.cfg);
    if (s.cfg.variant == Variant::fast_cmaes && next % interval == 0) s.paths[1] = s.paths[0];
    if (s.cfg.variant == Variant::rmes && next % interval == 0) {
      if (static_cast<int>(s.paths.size()) < s.cfg.num_paths) {
        s.paths.push_back(p);
        s.path_stamps.push_back(next);
      } else {
        // Drop the path closest in time to its successor; if every gap exceeds
        // the interval, drop the oldest.
        std::size_t drop = 0;
        long best_gap = std::numeric_limits<long>::max();
        for (std::size_t i = 0; i + 1 < s.path_stamps.size(); ++i) {
          const long g = s.path_stamps[i + 1] - s.path_stamps[i];
          if (g < best_gap) {
            best_gap = g;
            drop = i;
          }
        }
        if (best_gap > interval) drop = 0;
        s.paths.erase(s.paths.begin() + static_cast<std::ptrdiff_t>(drop));
        s.path_stamps.erase(s.path_stamps.begin() + static_cast<std::ptrdiff_t>(drop));
        s.paths.push_back(p);
        s.path_stamps.push_back(next);
      }
    }
    std::vector<double> parents(mu);
    for (std::size_t i = 0; i < mu; ++i) parents[i] = fitness[order[i]];
    success_rule(s, parents, w);
  }

  if (!(s.sigma > 0.0) || !std::isfinite(s.sigma)) {
    spdlog::warn("sigma degenerated to {} at generation {}, clamped", s.sigma, s.generation);
    s.sigma = std::isfinite(s.sigma) ? 1e-300 : 1e300;
  }
  ++s.generation;
  if (refresh_eigen) decompose(s);
}

std::string to_cbor(const EsState& s) {
  json j;
  const auto& c = s.cfg;
  j["cfg"] = {{"variant", variant_name(c.variant)},
              {"dim", c.dim},
              {"population", c.population},
              {"initial_sigma", c.initial_sigma},
              {"mean_init", mean_init_name(c.mean_init)},
              {"path_lr", c.path_lr ? json(*c.path_lr) : json(nullptr)},
              {"seed", c.seed},
              {"stall_generations", c.stall_generations},
              {"num_paths", c.num_paths},
              {"snapshot_interval", c.snapshot_interval},
              {"initial_mean", c.initial_mean ? vec_json(*c.initial_mean) : json(nullptr)}};
  j["mean"] = vec_json(s.mean);
  j["sigma"] = s.sigma;
  j["C"] = mat_json(s.C);
  j["B"] = mat_json(s.B);
  j["eig_sqrt"] = vec_json(s.eig_sqrt);
  j["eigen_generation"] = s.eigen_generation;
  j["diag"] = vec_json(s.diag);
  j["pc"] = vec_json(s.pc);
  j["ps"] = vec_json(s.ps);
  j["paths"] = json::array();
  for (const auto& p : s.paths) j["paths"].push_back(vec_json(p));
  j["path_stamps"] = s.path_stamps;
  j["evo_path"] = vec_json(s.evo_path);
  j["success"] = s.success;
  j["prev_parent_fitness"] = s.prev_parent_fitness;
  j["generation"] = s.generation;
  j["evaluations"] = s.evaluations;
  j["best_x"] = vec_json(s.best_x);
  // -inf is not representable in JSON; CBOR keeps it but we normalise anyway.
  j["best_f"] = std::isfinite(s.best_f) ? json(s.best_f) : json(nullptr);
  j["stall_count"] = s.stall_count;
  j["stalled"] = s.stalled;
  j["loading_events"] = s.loading_events;
  j["rng"] = s.rng.serialize();
  const auto bytes = json::to_cbor(j);
  return {bytes.begin(), bytes.end()};
}

EsState from_cbor(std::string_view bytes) {
  try {
    const json j = json::from_cbor(bytes.begin(), bytes.end());
    EsState s;
    const auto& c = j.at("cfg");
    s.cfg.variant = parse_variant(c.at("variant").get<std::string>());
    s.cfg.dim = c.at("dim").get<int>();
    s.cfg.population = c.at("population").get<int>();
    s.cfg.initial_sigma = c.at("initial_sigma").get<double>();
    s.cfg.mean_init = parse_mean_init(c.at("mean_init").get<std::string>());
    if (!c.at("path_lr").is_null()) s.cfg.path_lr = c.at("path_lr").get<double>();
    s.cfg.seed = c.at("seed").get<std::uint64_t>();
    s.cfg.stall_generations = c.at("stall_generations").get<int>();
    s.cfg.num_paths = c.at("num_paths").get<int>();
    s.cfg.snapshot_interval = c.at("snapshot_interval").get<int>();
    if (!c.at("initial_mean").is_null()) s.cfg.initial_mean = json_vec(c.at("initial_mean"));
    s.mean = json_vec(j.at("mean"));
    s.sigma = j.at("sigma").get<double>();
    s.C = json_mat(j.at("C"));
    s.B = json_mat(j.at("B"));
    s.eig_sqrt = json_vec(j.at("eig_sqrt"));
    s.eigen_generation = j.at("eigen_generation").get<long>();
    s.diag = json_vec(j.at("diag"));
    s.pc = json_vec(j.at("pc"));
    s.ps = json_vec(j.at("ps"));
    for (const auto& p : j.at("paths")) s.paths.push_back(json_vec(p));
    s.path_stamps = j.at("path_stamps").get<std::vector<long>>();
    s.evo_path = json_vec(j.at("evo_path"));
    s.success = j.at("success").get<double>();
    s.prev_parent_fitness = j.at("prev_parent_fitness").get<std::vector<double>>();
    s.generation = j.at("generation").get<long>();
    s.evaluations = j.at("evaluations").get<long>();
    s.best_x = json_vec(j.at("best_x"));
    s.best_f = j.at("best_f").is_null() ? -std::numeric_limits<double>::infinity() : j.at("best_f").get<double>();
    s.stall_count = j.at("stall_count").get<int>();
    s.stalled = j.at("stalled").get<bool>();
    s.loading_events = j.at("loading_events").get<int>();
    s.rng = Rng::deserialize(j.at("rng").get<std::string>());
    s.cfg.validate();
    return s;
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("malformed ES state: ") + e.what());
  }
}

std::string trace_csv(const std::vector<TraceRow>& rows) {
  std::ostringstream os;
  os << "generation,evaluations,sigma,best_f,generation_best_f\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%ld,%ld,%.17g,%.17g,%.17g\n", r.generation, r.evaluations, r.sigma, r.best_f,
                  r.generation_best_f);
    os << buf;
  }
  return os.str();
}

}  // namespace ltk::es
