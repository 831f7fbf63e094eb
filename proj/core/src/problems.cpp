#include "ltk/problems.hpp"

#include "ltk/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace ltk::problems {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

constexpr std::array<std::string_view, kNumFunctions> kNames = {
    "sphere",
    "ellipsoidal",
    "rastrigin",
    "buche_rastrigin",
    "linear_slope",
    "attractive_sector",
    "step_ellipsoidal",
    "rosenbrock",
    "rosenbrock_rotated",
    "ellipsoidal_high_conditioning",
    "discus",
    "bent_cigar",
    "sharp_ridge",
    "different_powers",
    "rastrigin_conditioned",
    "weierstrass",
    "schaffers_f7",
    "schaffers_f7_ill_conditioned",
    "griewank_rosenbrock",
    "schwefel",
    "gallagher_101_peaks",
    "gallagher_21_peaks",
    "katsuura",
    "lunacek_bi_rastrigin",
};

// exponent in [0, 1] along the coordinate index; 0 for one-dimensional problems
double ramp(std::size_t i, std::size_t d) { return d > 1 ? static_cast<double>(i) / static_cast<double>(d - 1) : 0.0; }

// diagonal of the BBOB conditioning matrix Lambda^alpha
double lambda(double alpha, std::size_t i, std::size_t d) { return std::pow(alpha, 0.5 * ramp(i, d)); }

std::vector<double> conditioned(std::span<const double> z, double alpha) {
  std::vector<double> u(z.begin(), z.end());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] *= lambda(alpha, i, u.size());
  return u;
}

double rastrigin(std::span<const double> u) {
  double cos_sum = 0.0;
  double sq = 0.0;
  for (double v : u) {
    cos_sum += std::cos(kTwoPi * v);
    sq += v * v;
  }
  return 10.0 * (static_cast<double>(u.size()) - cos_sum) + sq;
}

double rosenbrock_terms(std::span<const double> u, bool griewank) {
  const std::size_t d = u.size();
  if (d < 2) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    const double a = u[i] * u[i] - u[i + 1];
    const double b = u[i] - 1.0;
    const double s = 100.0 * a * a + b * b;
    acc += griewank ? (s / 4000.0 - std::cos(s)) : s;
  }
  if (griewank) return 10.0 * acc / static_cast<double>(d - 1) + 10.0;
  return acc;
}

std::vector<double> rosenbrock_frame(std::span<const double> z) {
  const double scale = std::max(1.0, std::sqrt(static_cast<double>(z.size())) / 8.0);
  std::vector<double> u(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) u[i] = scale * z[i] + 1.0;
  return u;
}

double schaffers(std::span<const double> z, double alpha) {
  const std::size_t d = z.size();
  if (d < 2) return 0.0;
  const auto u = conditioned(z, alpha);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < d; ++i) {
    const double s = std::sqrt(u[i] * u[i] + u[i + 1] * u[i + 1]);
    const double rs = std::sqrt(s);
    const double sn = std::sin(50.0 * std::pow(s, 0.2));
    acc += rs + rs * sn * sn;
  }
  const double mean = acc / static_cast<double>(d - 1);
  return mean * mean;
}

double weierstrass(std::span<const double> z) {
  constexpr int kTerms = 12;
  const auto u = conditioned(z, 0.01);
  auto inner = [](double v) {
    double acc = 0.0;
    double half = 1.0;
    double three = 1.0;
    for (int k = 0; k < kTerms; ++k) {
      acc += half * std::cos(kTwoPi * three * (v + 0.5));
      half *= 0.5;
      three *= 3.0;
    }
    return acc;
  };
  const double f0 = inner(0.0);
  double acc = 0.0;
  for (double v : u) acc += inner(v) - f0;
  const double base = acc / static_cast<double>(u.size());
  return 10.0 * base * base * base;
}

double schwefel(std::span<const double> z) {
  const auto u = conditioned(z, 10.0);
  const double d = static_cast<double>(u.size());
  double acc = 0.0;
  double pen = 0.0;
  for (double v : u) {
    const double w = 100.0 * (v + 4.2096874633);
    acc += w * std::sin(std::sqrt(std::abs(w)));
    const double excess = std::max(0.0, std::abs(w) / 100.0 - 5.0);
    pen += excess * excess;
  }
  return -acc / (100.0 * d) + 4.189828872724339 + 100.0 * pen;
}

double katsuura(std::span<const double> z) {
  const auto u = conditioned(z, 100.0);
  const double d = static_cast<double>(u.size());
  const double exponent = 10.0 / std::pow(d, 1.2);
  double prod = 1.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double acc = 0.0;
    double p = 2.0;
    for (int j = 1; j <= 32; ++j) {
      const double t = p * u[i];
      acc += std::abs(t - std::nearbyint(t)) / p;
      p *= 2.0;
    }
    prod *= std::pow(1.0 + static_cast<double>(i + 1) * acc, exponent);
  }
  const double scale = 10.0 / (d * d);
  return scale * prod - scale;
}

double lunacek(std::span<const double> z) {
  const std::size_t n = z.size();
  const double d = static_cast<double>(n);
  constexpr double mu0 = 2.5;
  const double s = 1.0 - 1.0 / (2.0 * std::sqrt(d + 20.0) - 8.2);
  const double mu1 = -std::sqrt((mu0 * mu0 - 1.0) / s);
  double a = 0.0;
  double b = 0.0;
  double cos_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xh = 2.0 * z[i] + mu0;
    a += (xh - mu0) * (xh - mu0);
    b += (xh - mu1) * (xh - mu1);
    cos_sum += std::cos(kTwoPi * lambda(100.0, i, n) * (xh - mu0));
  }
  return std::min(a, d + s * b) + 10.0 * (d - cos_sum);
}

}  // namespace

std::string_view noise_kind_name(NoiseModel::Kind kind) {
  return kind == NoiseModel::Kind::gaussian_multiplicative ? "gaussian_multiplicative" : "cauchy_additive";
}

NoiseModel::Kind parse_noise_kind(std::string_view name) {
  if (name == "gaussian_multiplicative") return NoiseModel::Kind::gaussian_multiplicative;
  if (name == "cauchy_additive") return NoiseModel::Kind::cauchy_additive;
  throw ConfigError("unknown noise kind '" + std::string(name) + "'");
}

bool is_implemented(int function_id) { return function_id >= 1 && function_id <= kNumFunctions; }

std::string_view function_name(int function_id) {
  if (!is_implemented(function_id)) throw ConfigError("unknown function id " + std::to_string(function_id));
  return kNames[static_cast<std::size_t>(function_id - 1)];
}

void ProblemSpec::validate() const {
  if (!is_implemented(function_id)) throw ConfigError("unknown function id " + std::to_string(function_id));
  if (dimension < 1) throw ConfigError("problem dimension must be >= 1, got " + std::to_string(dimension));
  if (offset.size() != static_cast<std::size_t>(dimension)) {
    throw ConfigError("offset has length " + std::to_string(offset.size()) + ", expected " + std::to_string(dimension));
  }
  for (double o : offset) {
    if (!(o > kLowerBound && o < kUpperBound)) throw ConfigError("offset must lie strictly inside the search box");
  }
  if (noise && !(noise->level >= 0.0 && std::isfinite(noise->level))) {
    throw ConfigError("noise level must be finite and non-negative");
  }
}

ProblemSpec random_spec(int function_id, int dimension, std::uint64_t seed, std::optional<NoiseModel> noise) {
  if (dimension < 1) throw ConfigError("problem dimension must be >= 1, got " + std::to_string(dimension));
  Rng rng(mix_seed({seed, 0x0ff5e7ULL}));
  ProblemSpec spec;
  spec.function_id = function_id;
  spec.dimension = dimension;
  spec.offset.resize(static_cast<std::size_t>(dimension));
  for (double& o : spec.offset) o = rng.uniform(-kOffsetRadius, kOffsetRadius);
  spec.noise = noise;
  spec.seed = seed;
  spec.validate();
  return spec;
}

BbobFunction::BbobFunction(int function_id, int dimension) : id_(function_id), dim_(dimension) {
  if (!is_implemented(function_id)) throw ConfigError("unknown function id " + std::to_string(function_id));
  if (dimension < 1) throw ConfigError("problem dimension must be >= 1");
  if (id_ == 21 || id_ == 22) {
    // Peak layout is part of the function definition, not of the instance.
    const bool many = id_ == 21;
    const std::size_t n_peaks = many ? 101 : 21;
    const double cond_global = many ? 1000.0 : 1.0e6;
    const double radius = many ? 5.0 : 4.9;
    Rng rng(mix_seed({0x9a11a9e5ULL, static_cast<std::uint64_t>(id_), static_cast<std::uint64_t>(dim_)}));
    std::vector<double> alphas(n_peaks - 1);
    for (std::size_t j = 0; j < alphas.size(); ++j) {
      alphas[j] = std::pow(1000.0, 2.0 * static_cast<double>(j) / static_cast<double>(n_peaks - 2));
    }
    for (std::size_t j = alphas.size(); j > 1; --j) std::swap(alphas[j - 1], alphas[rng.index(j)]);
    const auto d = static_cast<std::size_t>(dim_);
    for (std::size_t p = 0; p < n_peaks; ++p) {
      Peak peak;
      const double alpha = p == 0 ? cond_global : alphas[p - 1];
      peak.weight = p == 0 ? 10.0 : 1.1 + 8.0 * static_cast<double>(p - 1) / static_cast<double>(n_peaks - 2);
      peak.center.assign(d, 0.0);
      if (p > 0) {
        for (double& c : peak.center) c = rng.uniform(-radius, radius);
      }
      peak.precision.resize(d);
      for (std::size_t i = 0; i < d; ++i) peak.precision[i] = lambda(alpha, i, d) / std::pow(alpha, 0.25);
      for (std::size_t i = d; i > 1; --i) std::swap(peak.precision[i - 1], peak.precision[rng.index(i)]);
      peaks_.push_back(std::move(peak));
    }
  }
}

double BbobFunction::gallagher(std::span<const double> z) const {
  const double inv = 1.0 / (2.0 * static_cast<double>(dim_));
  double best = 0.0;
  for (const auto& peak : peaks_) {
    double q = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double diff = z[i] - peak.center[i];
      q += peak.precision[i] * diff * diff;
    }
    best = std::max(best, peak.weight * std::exp(-inv * q));
  }
  const double r = 10.0 - best;
  return r * r;
}

double BbobFunction::operator()(std::span<const double> z) const {
  const std::size_t d = z.size();
  if (d != static_cast<std::size_t>(dim_)) throw ConfigError("point dimension does not match function dimension");
  switch (id_) {
    case 1: {
      double acc = 0.0;
      for (double v : z) acc += v * v;
      return acc;
    }
    case 2:
    case 10: {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += std::pow(10.0, 6.0 * ramp(i, d)) * z[i] * z[i];
      return acc;
    }
    case 3:
      return rastrigin(z);
    case 4: {
      std::vector<double> u(z.begin(), z.end());
      for (std::size_t i = 0; i < d; ++i) {
        double s = std::pow(10.0, 0.5 * ramp(i, d));
        if (u[i] > 0.0 && i % 2 == 0) s *= 10.0;
        u[i] *= s;
      }
      return rastrigin(u);
    }
    case 5: {
      constexpr double kCorner = 5.0;
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double s = std::pow(10.0, ramp(i, d));
        const double zi = kCorner * z[i] < kCorner * kCorner ? z[i] : kCorner;
        acc += kCorner * s - s * zi;
      }
      return acc;
    }
    case 6: {
      const auto u = conditioned(z, 10.0);
      double acc = 0.0;
      for (double v : u) {
        const double s = v > 0.0 ? 100.0 : 1.0;
        acc += (s * v) * (s * v);
      }
      return std::pow(acc, 0.9);
    }
    case 7: {
      const auto u = conditioned(z, 10.0);
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double r = std::abs(u[i]) > 0.5 ? std::floor(0.5 + u[i]) : std::floor(0.5 + 10.0 * u[i]) / 10.0;
        acc += std::pow(10.0, 2.0 * ramp(i, d)) * r * r;
      }
      return 0.1 * std::max(std::abs(u[0]) / 1.0e4, acc);
    }
    case 8:
    case 9:
      return rosenbrock_terms(rosenbrock_frame(z), false);
    case 11: {
      double acc = 1.0e6 * z[0] * z[0];
      for (std::size_t i = 1; i < d; ++i) acc += z[i] * z[i];
      return acc;
    }
    case 12: {
      double rest = 0.0;
      for (std::size_t i = 1; i < d; ++i) rest += z[i] * z[i];
      return z[0] * z[0] + 1.0e6 * rest;
    }
    case 13: {
      double rest = 0.0;
      for (std::size_t i = 1; i < d; ++i) rest += z[i] * z[i];
      return z[0] * z[0] + 100.0 * std::sqrt(rest);
    }
    case 14: {
      double acc = 0.0;
      for (std::size_t i = 0; i < d; ++i) acc += std::pow(std::abs(z[i]), 2.0 + 4.0 * ramp(i, d));
      return std::sqrt(acc);
    }
    case 15:
      return rastrigin(conditioned(z, 10.0));
    case 16:
      return weierstrass(z);
    case 17:
      return schaffers(z, 10.0);
    case 18:
      return schaffers(z, 1000.0);
    case 19:
      return rosenbrock_terms(rosenbrock_frame(z), true);
    case 20:
      return schwefel(z);
    case 21:
    case 22:
      return gallagher(z);
    case 23:
      return katsuura(z);
    case 24:
      return lunacek(z);
    default:
      throw ConfigError("unknown function id " + std::to_string(id_));
  }
}

Problem::Problem(ProblemSpec spec, std::optional<long> budget)
    : spec_(std::move(spec)),
      function_(spec_.function_id, spec_.dimension),
      budget_(budget),
      best_so_far_(std::numeric_limits<double>::infinity()),
      noise_rng_(mix_seed({spec_.seed, 0x4015eULL})) {
  spec_.validate();
  if (budget_ && *budget_ < 0) throw ConfigError("budget must be non-negative");
}

double Problem::peek(std::span<const double> x) const {
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = x[j] - spec_.offset[j];
  return function_(z);
}

Vector Problem::evaluate_batch(const Matrix& X) {
  const long m = static_cast<long>(X.rows());
  if (X.cols() != spec_.dimension) {
    throw ConfigError("batch has " + std::to_string(X.cols()) + " columns, problem dimension is " +
                      std::to_string(spec_.dimension));
  }
  if (budget_ && fe_count_ + m > *budget_) throw BudgetExhausted(fe_count_, m, *budget_);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double v = X(i, j);
      if (!(v >= kLowerBound && v <= kUpperBound)) {
        throw Error("candidate " + std::to_string(i) + " lies outside the search box");
      }
    }
  }
  Vector y(m);
  std::vector<double> z(static_cast<std::size_t>(spec_.dimension));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (std::size_t j = 0; j < z.size(); ++j) z[j] = X(i, static_cast<Eigen::Index>(j)) - spec_.offset[j];
    double f = function_(z);
    if (spec_.noise) {
      if (spec_.noise->kind == NoiseModel::Kind::gaussian_multiplicative) {
        f *= std::exp(spec_.noise->level * noise_rng_.normal());
      } else {
        const double n = std::clamp(spec_.noise->level * noise_rng_.cauchy(), -1.0e6, 1.0e6);
        f += n;
      }
    }
    y[i] = f;
  }
  fe_count_ += m;
  if (m > 0) best_so_far_ = std::min(best_so_far_, y.minCoeff());
  return y;
}

Problem make_problem(const ProblemSpec& spec, std::optional<long> budget) { return Problem(spec, budget); }

Split bbob_split() {
  return Split{{1, 2, 5, 7, 13, 16, 17, 18, 21, 22, 23, 24}, {3, 4, 6, 8, 9, 10, 11, 12, 14, 15, 19, 20}};
}

}  // namespace ltk::problems
