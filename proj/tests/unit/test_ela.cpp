#include "ltk/ela.hpp"
#include "ltk/error.hpp"
#include "ltk/problems.hpp"
#include "ltk/rng.hpp"
#include "oracles/ela_oracle.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using namespace ltk;

Observation random_obs(Rng& rng, Eigen::Index m, Eigen::Index d) {
  Observation o{Matrix(m, d), Vector(m), Vector::Constant(d, -5.0), Vector::Constant(d, 5.0)};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) o.X(i, j) = rng.uniform(-5.0, 5.0);
    o.y[i] = rng.normal() * 10.0;
  }
  return o;
}

void expect_no_nan(const ela::FeatureVector& fv) {
  for (const auto& e : fv.entries) {
    if (e.value) {
      EXPECT_TRUE(std::isfinite(*e.value)) << e.name;
    }
  }
}

TEST(Ela, FdcPerfectCorrelationConstruction) {
  Rng rng(1);
  auto obs = random_obs(rng, 30, 3);
  for (Eigen::Index i = 0; i < 30; ++i) obs.y[i] = (obs.X.row(i) - obs.X.row(4)).norm();
  const auto fv = ela::fdc_features(obs);
  EXPECT_NEAR(*fv.at("fdc.corr_dist_best"), 1.0, 1e-9);
}

TEST(Ela, FdcPairStatisticsMatchBruteForce) {
  Rng rng(2);
  const auto obs = random_obs(rng, 12, 4);
  std::vector<double> dd, yd;
  for (Eigen::Index i = 0; i < 12; ++i) {
    for (Eigen::Index j = i + 1; j < 12; ++j) {
      dd.push_back(oracle::dist(obs.X, i, j));
      yd.push_back(std::abs(obs.y[i] - obs.y[j]));
    }
  }
  double md = 0, my = 0;
  for (std::size_t k = 0; k < dd.size(); ++k) {
    md += dd[k] / dd.size();
    my += yd[k] / yd.size();
  }
  const auto fv = ela::fdc_features(obs);
  EXPECT_NEAR(*fv.at("fdc.dist_mean"), md, 1e-9);
  EXPECT_NEAR(*fv.at("fdc.ydiff_mean"), my, 1e-9);
}

TEST(Ela, FdcConstantObjectiveCorrelationMissing) {
  Rng rng(3);
  auto obs = random_obs(rng, 10, 2);
  obs.y.setConstant(1.0);
  EXPECT_FALSE(ela::fdc_features(obs).at("fdc.corr_dist_best").has_value());
}

TEST(Ela, NbcMatchesBruteForce) {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto obs = random_obs(rng, 10, 1 + t % 4);
    const auto got = ela::nbc_features(obs);
    const auto want = oracle::nbc(obs);
    EXPECT_NEAR(*got.at("nbc.nb_nn_ratio"), *want.nb_nn_ratio, 1e-9);
    EXPECT_NEAR(*got.at("nbc.ratio_std"), *want.ratio_std, 1e-9);
    EXPECT_NEAR(*got.at("nbc.nn_rank_corr"), *want.nn_rank_corr, 1e-9);
  }
}

TEST(Ela, NbcTiesBrokenByIndex) {
  Rng rng(5);
  auto obs = random_obs(rng, 10, 2);
  obs.y.setConstant(3.0);
  obs.y[7] = 3.5;
  const auto got = ela::nbc_features(obs);
  const auto want = oracle::nbc(obs);
  EXPECT_NEAR(*got.at("nbc.nb_nn_ratio"), *want.nb_nn_ratio, 1e-9);
}

TEST(Ela, DispersionMatchesBruteForce) {
  Rng rng(6);
  for (int t = 0; t < 10; ++t) {
    const auto obs = random_obs(rng, t < 5 ? 10 : 40, 3);
    const auto fv = ela::dispersion_features(obs);
    for (double q : {0.25}) {
      const auto [top, all] = oracle::dispersion(obs, q);
      EXPECT_NEAR(*fv.at("disp.ratio_q25"), top / all, 1e-9);
      EXPECT_NEAR(*fv.at("disp.diff_q25"), top - all, 1e-9);
    }
  }
}

TEST(Ela, DispersionSmallSamplesMissing) {
  Rng rng(7);
  const auto fv = ela::dispersion_features(random_obs(rng, 10, 2));
  // ceil(0.02 * 10) = 1 point: no pairs
  EXPECT_FALSE(fv.at("disp.ratio_q02").has_value());
  const auto tiny = ela::dispersion_features(random_obs(rng, 6, 2));
  EXPECT_EQ(tiny.missing_count(), tiny.size());
}

TEST(Ela, InformationContentConstantSequenceIsNeutral) {
  Rng rng(8);
  auto obs = random_obs(rng, 20, 3);
  obs.y.setConstant(-2.0);
  const auto fv = ela::information_content(obs);
  EXPECT_EQ(*fv.at("ic.neutral0"), 1.0);
  EXPECT_EQ(*fv.at("ic.h_max"), 0.0);
  EXPECT_EQ(*fv.at("ic.m0"), 0.0);
  EXPECT_FALSE(fv.at("ic.eps_half").has_value());
}

TEST(Ela, InformationContentRangesAndGrid) {
  const auto grid = ela::ic_epsilon_grid();
  ASSERT_EQ(grid.size(), 16u);
  EXPECT_EQ(grid[0], 0.0);
  EXPECT_DOUBLE_EQ(grid[1], 1e-5);
  EXPECT_DOUBLE_EQ(grid[15], 1e5);
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const auto fv = ela::information_content(random_obs(rng, 30, 2));
    EXPECT_GE(*fv.at("ic.h_max"), 0.0);
    EXPECT_LE(*fv.at("ic.h_max"), 1.0);
    EXPECT_GE(*fv.at("ic.m0"), 0.0);
    EXPECT_LE(*fv.at("ic.m0"), 1.0);
  }
}

TEST(Ela, DuplicatePointsGiveMissingNotNan) {
  Rng rng(10);
  auto obs = random_obs(rng, 15, 2);
  obs.X.row(3) = obs.X.row(9);
  const auto fv = ela::full_suite(obs);
  expect_no_nan(fv);
  EXPECT_FALSE(fv.at("ic.h_max").has_value());
  EXPECT_FALSE(fv.at("nbc.ratio_std").has_value());
}

TEST(Ela, DistributionMomentsOfKnownSample) {
  Vector y(4);
  y << 0.0, 0.0, 0.0, 4.0;
  // mean 1, m2 = 3, m3 = 6, m4 = 21
  const auto fv = ela::distribution_features(y);
  EXPECT_NEAR(*fv.at("dist.skewness"), 6.0 / std::pow(3.0, 1.5), 1e-12);
  EXPECT_NEAR(*fv.at("dist.kurtosis"), 21.0 / 9.0 - 3.0, 1e-12);
  EXPECT_EQ(*fv.at("dist.peaks"), 2.0);
}

TEST(Ela, MetaModelExactFits) {
  Rng rng(11);
  auto obs = random_obs(rng, 60, 3);
  for (Eigen::Index i = 0; i < 60; ++i) obs.y[i] = 2.0 + obs.X(i, 0) - 3.0 * obs.X(i, 1) + 0.5 * obs.X(i, 2);
  auto fv = ela::meta_model_features(obs);
  EXPECT_NEAR(*fv.at("meta.lin_adj_r2"), 1.0, 1e-9);
  EXPECT_NEAR(*fv.at("meta.lin_intercept"), 2.0, 1e-9);
  EXPECT_NEAR(*fv.at("meta.lin_coef_ratio"), 6.0, 1e-9);
  for (Eigen::Index i = 0; i < 60; ++i) obs.y[i] = obs.X.row(i).squaredNorm();
  fv = ela::meta_model_features(obs);
  EXPECT_NEAR(*fv.at("meta.quad_adj_r2"), 1.0, 1e-9);
  EXPECT_LT(*fv.at("meta.lin_adj_r2"), 0.5);
}

TEST(Ela, LevelSetSeparableByHyperplane) {
  Rng rng(12);
  auto obs = random_obs(rng, 100, 2);
  for (Eigen::Index i = 0; i < 100; ++i) obs.y[i] = obs.X(i, 0);
  const auto fv = ela::level_set_features(obs);
  EXPECT_LE(*fv.at("ls.lda_mmce_q50"), 0.05);
}

TEST(Ela, ConvexityOnSphereAndBudgetCharge) {
  const auto spec = problems::random_spec(1, 2, 3);
  auto p = problems::make_problem(spec);
  Rng rng(13);
  Observation obs = random_obs(rng, 20, 2);
  obs.y = p.evaluate_batch(obs.X);
  const long before = p.fe_count();
  const auto fv = ela::convexity_features(obs, p, 4);
  EXPECT_EQ(p.fe_count() - before, 100);
  EXPECT_GE(*fv.at("conv.convex_p"), 0.99);
  EXPECT_LT(*fv.at("conv.lin_dev_orig"), 0.0);
}

TEST(Ela, LocalSearchOnSphereFindsOneBasin) {
  const auto spec = problems::random_spec(1, 2, 3);
  auto p = problems::make_problem(spec);
  Rng rng(14);
  Observation obs = random_obs(rng, 20, 2);
  obs.y = p.evaluate_batch(obs.X);
  const auto fv = ela::local_search_features(obs, p);
  EXPECT_DOUBLE_EQ(*fv.at("lsearch.n_local_optima"), 0.1);
  EXPECT_DOUBLE_EQ(*fv.at("lsearch.basin_size_max"), 1.0);
}

TEST(Ela, SuiteWidthsFixedAcrossShapes) {
  Rng rng(15);
  const auto names = ela::full_suite_names();
  for (auto [m, d] : {std::pair<Eigen::Index, Eigen::Index>{2, 1}, {12, 3}, {50, 10}}) {
    const auto obs = random_obs(rng, m, d);
    const auto base = ela::baseline_suite(obs);
    EXPECT_EQ(base.size(), ela::baseline_width());
    const auto full = ela::full_suite(obs);
    EXPECT_EQ(full.names(), names);
    expect_no_nan(full);
  }
}

TEST(Ela, CsvExport) {
  Rng rng(16);
  EXPECT_EQ(ela::to_csv({}), "");
  auto obs = random_obs(rng, 6, 2);
  const std::string text = ela::to_csv({ela::baseline_suite(obs)});
  EXPECT_EQ(text.rfind("fdc.corr_dist_best,", 0), 0u);
  EXPECT_NE(text.find("NA"), std::string::npos);
}

TEST(Ela, HandcraftedStateRanges) {
  Rng rng(17);
  const auto obs = random_obs(rng, 10, 3);
  const std::vector<double> hist{5.0, 4.0, 4.0, 1.0};
  const Vector s = ela::handcrafted_state({3, 10, hist, obs});
  ASSERT_EQ(s.size(), 8);
  EXPECT_DOUBLE_EQ(s[0], 0.3);
  EXPECT_DOUBLE_EQ(s[1], 0.8);
  EXPECT_TRUE(s.allFinite());
  EXPECT_EQ(ela::handcrafted_names().size(), 8u);
}

}  // namespace
