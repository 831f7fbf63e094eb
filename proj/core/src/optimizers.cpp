#include "ltk/optimizers.hpp"

#include "ltk/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>

namespace ltk::optimizers {

namespace {

double clamp_warn(double v, double lo, double hi, const char* what) {
  if (v >= lo && v <= hi) return v;
  const double c = std::isnan(v) ? lo : std::clamp(v, lo, hi);
  spdlog::warn("{} = {} outside [{}, {}], clamped to {}", what, v, lo, hi, c);
  return c;
}

void track_best(OptimizerState& s) { s.best_so_far = std::min(s.best_so_far, s.y.minCoeff()); }

}  // namespace

std::string_view kind_name(Kind kind) { return kind == Kind::de ? "de" : "pso"; }

Kind parse_kind(std::string_view name) {
  if (name == "de" || name == "DE") return Kind::de;
  if (name == "pso" || name == "PSO") return Kind::pso;
  throw ConfigError("unknown optimizer kind '" + std::string(name) + "' (expected de or pso)");
}

Observation OptimizerState::observation(const problems::Problem& problem) const {
  return Observation{X, y, problem.lower(), problem.upper()};
}

OptimizerState initialize(problems::Problem& problem, int population, Rng& rng) {
  if (population < 2) throw ConfigError("population must be at least 2");
  const Eigen::Index d = problem.dimension();
  const Vector lb = problem.lower(), ub = problem.upper();
  OptimizerState s;
  s.X.resize(population, d);
  for (Eigen::Index i = 0; i < population; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) s.X(i, k) = rng.uniform(lb[k], ub[k]);
  }
  s.y = problem.evaluate_batch(s.X);
  s.velocity = Matrix::Zero(population, d);
  s.pbest_x = s.X;
  s.pbest_y = s.y;
  s.pbest_y.minCoeff(&s.gbest);
  s.best_so_far = s.y.minCoeff();
  return s;
}

void de_step(OptimizerState& s, const DeConfig& cfg, problems::Problem& problem, Rng& rng) {
  const Eigen::Index m = s.population(), d = s.X.cols();
  if (m < 4) throw ConfigError("DE needs a population of at least 4, got " + std::to_string(m));
  if (cfg.F.size() != m || cfg.Cr.size() != m) {
    throw ConfigError("DE controls must have one entry per individual (" + std::to_string(m) + ")");
  }
  const Vector lb = problem.lower(), ub = problem.upper();
  Matrix trials(m, d);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double F = clamp_warn(cfg.F[i], 0.0, 1.0, "F");
    const double Cr = clamp_warn(cfg.Cr[i], 0.0, 1.0, "Cr");
    const auto draw = [&](std::initializer_list<Eigen::Index> taken) {
      for (;;) {
        const auto r = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(m)));
        if (std::find(taken.begin(), taken.end(), r) == taken.end()) return r;
      }
    };
    const Eigen::Index r1 = draw({i});
    const Eigen::Index r2 = draw({i, r1});
    const Eigen::Index r3 = draw({i, r1, r2});
    const auto jrand = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(d)));
    for (Eigen::Index k = 0; k < d; ++k) {
      const bool cross = rng.uniform() < Cr || k == jrand;
      const double v = cross ? s.X(r1, k) + F * (s.X(r2, k) - s.X(r3, k)) : s.X(i, k);
      trials(i, k) = std::clamp(v, lb[k], ub[k]);
    }
  }
  const Vector ty = problem.evaluate_batch(trials);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (ty[i] <= s.y[i]) {
      s.X.row(i) = trials.row(i);
      s.y[i] = ty[i];
    }
  }
  track_best(s);
  ++s.step;
}

void pso_step(OptimizerState& s, const PsoConfig& cfg, problems::Problem& problem, Rng& rng) {
  const Eigen::Index m = s.population(), d = s.X.cols();
  const double w = clamp_warn(cfg.w, 0.0, 1.0, "w");
  const double c1 = clamp_warn(cfg.c1, 0.0, std::numeric_limits<double>::max(), "c1");
  const double c2 = clamp_warn(cfg.c2, 0.0, std::numeric_limits<double>::max(), "c2");
  const Vector lb = problem.lower(), ub = problem.upper();
  const Vector vmax = kVelocityLimit * (ub - lb);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) {
      const double u1 = rng.uniform();
      const double u2 = rng.uniform();
      double v = w * s.velocity(i, k) + c1 * u1 * (s.pbest_x(i, k) - s.X(i, k)) +
                 c2 * u2 * (s.pbest_x(s.gbest, k) - s.X(i, k));
      v = std::clamp(v, -vmax[k], vmax[k]);
      s.velocity(i, k) = v;
      s.X(i, k) = std::clamp(s.X(i, k) + v, lb[k], ub[k]);
    }
  }
  s.y = problem.evaluate_batch(s.X);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (s.y[i] < s.pbest_y[i]) {
      s.pbest_y[i] = s.y[i];
      s.pbest_x.row(i) = s.X.row(i);
    }
  }
  s.pbest_y.minCoeff(&s.gbest);
  track_best(s);
  ++s.step;
}

}  // namespace ltk::optimizers
