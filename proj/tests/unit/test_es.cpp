#include "ltk/error.hpp"
#include "ltk/es.hpp"

#include <Eigen/QR>
#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>

using namespace ltk;
using namespace ltk::es;

namespace {

const Variant kAll[] = {Variant::cmaes, Variant::sep_cmaes, Variant::fast_cmaes, Variant::r1es, Variant::rmes};

EsConfig config(Variant v, int dim, int pop, std::uint64_t seed) {
  EsConfig c;
  c.variant = v;
  c.dim = dim;
  c.population = pop;
  c.seed = seed;
  c.initial_sigma = 0.5;
  c.mean_init = MeanInit::uniform_random;
  return c;
}

double sphere(const Vector& x) { return x.squaredNorm(); }

double rosenbrock(const Vector& x) {
  double s = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    s += 100.0 * std::pow(x[i + 1] - x[i] * x[i], 2) + std::pow(1.0 - x[i], 2);
  }
  return s;
}

double ellipsoid(const Vector& x) {
  double s = 0.0;
  const auto D = static_cast<double>(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) s += std::pow(1e4, static_cast<double>(i) / (D - 1.0)) * x[i] * x[i];
  return s;
}

/// Minimises f until `target` or the budget; returns the best value seen.
double minimise(EsState& s, const std::function<double(const Vector&)>& f, long budget, double target) {
  double best = INFINITY;
  long used = 0;
  while (used < budget && best > target) {
    const auto cand = es_sample(s, s.cfg.population);
    std::vector<double> fit;
    for (const auto& c : cand) {
      const double v = f(c);
      best = std::min(best, v);
      fit.push_back(-v);
    }
    used += static_cast<long>(cand.size());
    es_update(s, cand, fit);
  }
  return best;
}

}  // namespace

TEST(Es, WeightsArePositiveDecreasingAndSumToOne) {
  for (int n : {4, 5, 10, 31}) {
    const auto w = recombination_weights(n);
    ASSERT_EQ(w.size(), static_cast<std::size_t>(n / 2));
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 1; i < w.size(); ++i) EXPECT_LT(w[i], w[i - 1]);
    EXPECT_GT(w.back(), 0.0);
  }
  // n = 10: raw weights ln(5.5) - ln(i)
  const auto w = recombination_weights(10);
  double raw[5], total = 0.0;
  for (int i = 0; i < 5; ++i) total += raw[i] = std::log(5.5) - std::log(i + 1.0);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(w[static_cast<std::size_t>(i)], raw[i] / total, 1e-14);
}

TEST(Es, RankOrderIsStableAndPutsNonFiniteLast) {
  const std::vector<double> f{1.0, NAN, 3.0, 1.0, -INFINITY, 3.0};
  const auto o = rank_order(f);
  const std::vector<std::size_t> want{2, 5, 0, 3, 1, 4};
  // NaN and -inf are both non-finite: they trail in index order
  EXPECT_EQ(o.size(), want.size());
  EXPECT_EQ(o[0], 2u);
  EXPECT_EQ(o[1], 5u);
  EXPECT_EQ(o[2], 0u);
  EXPECT_EQ(o[3], 3u);
  EXPECT_EQ(o[4], 1u);
  EXPECT_EQ(o[5], 4u);
}

TEST(Es, InitialSamplingMatchesIsotropicGaussian) {
  for (Variant v : kAll) {
    auto c = config(v, 3, 10, 7);
    c.initial_sigma = 0.8;
    c.mean_init = MeanInit::zero;
    auto s = es_init(c);
    const int n = 40000;
    const auto xs = es_sample(s, n);
    Vector mean = Vector::Zero(3);
    for (const auto& x : xs) mean += x / n;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(3, 3);
    for (const auto& x : xs) cov += (x - mean) * (x - mean).transpose() / (n - 1);
    const double se = 0.8 / std::sqrt(n);
    // With empty paths the rank-one mixtures keep only (1 - c) I, where c is
    // the published low-rank learning rate 1 / (3 sqrt(D) + 5).
    const bool mixed = v == Variant::r1es || v == Variant::fast_cmaes;
    const double var = 0.64 * (mixed ? 1.0 - 1.0 / (3.0 * std::sqrt(3.0) + 5.0) : 1.0);
    for (int k = 0; k < 3; ++k) {
      EXPECT_NEAR(mean[k], 0.0, 5 * se) << variant_name(v);
      // var of the sample variance is 2 sigma^4 / n
      EXPECT_NEAR(cov(k, k), var, 5 * var * std::sqrt(2.0 / n)) << variant_name(v);
      for (int l = 0; l < k; ++l) EXPECT_NEAR(cov(k, l), 0.0, 5 * 0.64 / std::sqrt(n)) << variant_name(v);
    }
  }
}

TEST(Es, StateDependsOnlyOnFitnessRanks) {
  const std::function<double(double)> transforms[] = {
      [](double f) { return 2.0 * f - 5.0; },
      [](double f) { return std::exp(f / 50.0); },
  };
  for (Variant v : kAll) {
    for (const auto& g : transforms) {
      auto a = es_init(config(v, 6, 10, 11));
      auto b = es_init(config(v, 6, 10, 11));
      for (int gen = 0; gen < 25; ++gen) {
        const auto ca = es_sample(a, 10), cb = es_sample(b, 10);
        std::vector<double> fa, fb;
        for (std::size_t i = 0; i < ca.size(); ++i) {
          ASSERT_EQ(ca[i], cb[i]) << variant_name(v) << " gen " << gen;
          fa.push_back(-sphere(ca[i]));
          fb.push_back(g(fa.back()));
        }
        es_update(a, ca, fa);
        es_update(b, cb, fb);
        ASSERT_EQ(a.mean, b.mean) << variant_name(v);
        ASSERT_EQ(a.sigma, b.sigma) << variant_name(v);
        ASSERT_EQ(a.best_x, b.best_x) << variant_name(v);
      }
    }
  }
}

TEST(Es, FullCmaSolvesSphereFromEverySeed) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = es_init(config(Variant::cmaes, 2, 6, seed));
    EXPECT_LT(minimise(s, sphere, 5000, 1e-10), 1e-10) << "seed " << seed;
  }
}

TEST(Es, FullCmaSolvesRosenbrockMostSeeds) {
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto c = config(Variant::cmaes, 10, 10, seed);
    c.mean_init = MeanInit::zero;
    c.stall_generations = 100000;
    auto s = es_init(c);
    if (minimise(s, rosenbrock, 100000, 1e-6) < 1e-6) ++solved;
  }
  EXPECT_GE(solved, 8);
}

TEST(Es, SeparableVariantSolvesAxisAlignedEllipsoid) {
  auto c = config(Variant::sep_cmaes, 10, 10, 3);
  c.stall_generations = 100000;
  auto s = es_init(c);
  EXPECT_LT(minimise(s, ellipsoid, 60000, 1e-8), 1e-8);
  EXPECT_TRUE(s.C.size() == 0);
}

namespace {

/// Evaluations spent until f < target, or -1 when the budget runs out.
long evaluations_to(EsState& s, const std::function<double(const Vector&)>& f, long budget, double target) {
  long used = 0;
  while (used < budget) {
    const auto cand = es_sample(s, s.cfg.population);
    std::vector<double> fit;
    for (const auto& c : cand) {
      ++used;
      const double v = f(c);
      if (v < target) return used;
      fit.push_back(-v);
    }
    es_update(s, cand, fit);
  }
  return -1;
}

}  // namespace

TEST(Es, SeparableNeedsFewerEvaluationsOnSeparableEllipsoid) {
  int sep_wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto cs = config(Variant::sep_cmaes, 10, 10, seed), cf = config(Variant::cmaes, 10, 10, seed);
    cs.stall_generations = cf.stall_generations = 100000;
    auto sep = es_init(cs), full = es_init(cf);
    const long ns = evaluations_to(sep, ellipsoid, 200000, 1e-8);
    const long nf = evaluations_to(full, ellipsoid, 200000, 1e-8);
    ASSERT_GT(ns, 0) << "seed " << seed;
    if (nf < 0 || ns < nf) ++sep_wins;
  }
  EXPECT_GE(sep_wins, 7);
}

TEST(Es, FullBeatsSeparableOnRotatedEllipsoid) {
  // fixed rotation from a seeded QR
  Rng rng(5);
  Eigen::MatrixXd a(10, 10);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) a(i, j) = rng.normal();
  }
  const Eigen::MatrixXd R = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
  const auto rotated = [&](const Vector& x) { return ellipsoid(R * x); };
  auto full = es_init(config(Variant::cmaes, 10, 10, 1));
  auto sep = es_init(config(Variant::sep_cmaes, 10, 10, 1));
  EXPECT_LT(minimise(full, rotated, 15000, 0.0), minimise(sep, rotated, 15000, 0.0));
}

TEST(Es, LowRankVariantsConvergeOnSphere) {
  for (Variant v : {Variant::fast_cmaes, Variant::r1es, Variant::rmes}) {
    auto c = config(v, 10, 10, 2);
    c.stall_generations = 100000;
    auto s = es_init(c);
    EXPECT_LT(minimise(s, sphere, 40000, 1e-8), 1e-8) << variant_name(v);
  }
}

TEST(Es, CborRoundTripResumesIdentically) {
  for (Variant v : kAll) {
    auto a = es_init(config(v, 5, 8, 21));
    minimise(a, sphere, 400, 0.0);
    auto b = from_cbor(to_cbor(a));
    EXPECT_EQ(to_cbor(a), to_cbor(b)) << variant_name(v);
    for (int gen = 0; gen < 5; ++gen) {
      const auto ca = es_sample(a, 8), cb = es_sample(b, 8);
      ASSERT_EQ(ca, cb) << variant_name(v);
      std::vector<double> f;
      for (const auto& x : ca) f.push_back(-sphere(x));
      es_update(a, ca, f);
      es_update(b, cb, f);
    }
    EXPECT_EQ(to_cbor(a), to_cbor(b)) << variant_name(v);
  }
}

TEST(Es, CorruptCborIsRejected) {
  const auto bytes = to_cbor(es_init(config(Variant::cmaes, 3, 6, 1)));
  EXPECT_ANY_THROW(from_cbor(bytes.substr(0, bytes.size() / 2)));
}

TEST(Es, FlatFitnessStalls) {
  auto c = config(Variant::fast_cmaes, 3, 6, 4);
  c.stall_generations = 3;
  auto s = es_init(c);
  for (int gen = 0; gen < 5; ++gen) {
    const auto cand = es_sample(s, 6);
    es_update(s, cand, std::vector<double>(6, 1.0));
  }
  EXPECT_TRUE(s.stalled);
}

TEST(Es, ConfigValidation) {
  auto c = config(Variant::cmaes, 0, 10, 0);
  EXPECT_THROW(es_init(c), ConfigError);
  c = config(Variant::cmaes, 3, 3, 0);
  EXPECT_THROW(es_init(c), ConfigError);
  c = config(Variant::cmaes, 3, 6, 0);
  c.initial_sigma = 0.0;
  EXPECT_THROW(es_init(c), ConfigError);
  for (Variant v : kAll) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_THROW(parse_variant("nelder_mead"), ConfigError);
}
