#include "ltk/analyzer.hpp"
#include "ltk/error.hpp"
#include "ltk/rng.hpp"
#include "oracles/attention_oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <numeric>

namespace {

using namespace ltk;
using analyzer::AnalyzerConfig;

Observation random_obs(Rng& rng, Eigen::Index m, Eigen::Index d, double lo = -5.0, double hi = 5.0) {
  Observation o{Matrix(m, d), Vector(m), Vector::Constant(d, lo), Vector::Constant(d, hi)};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) o.X(i, j) = rng.uniform(lo, hi);
    o.y[i] = rng.uniform(-100.0, 100.0);
  }
  return o;
}

double max_diff(const Matrix& a, const oracle::Mat& b) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) worst = std::max(worst, std::abs(a(i, k) - b[i][k]));
  }
  return worst;
}

TEST(Analyzer, ParameterCountMatchesFormulaAndLayout) {
  for (const AnalyzerConfig cfg : {AnalyzerConfig{16, 1, 1, 16}, AnalyzerConfig{8, 2, 2, 12}, AnalyzerConfig{4, 4, 3, 4}}) {
    const std::size_t h = cfg.hidden_dim, l = cfg.num_layers, ff = cfg.ff_inner_dim;
    const std::size_t formula = 2 * h + 2 * l * (4 * h * h + 2 * h * ff + ff + 5 * h);
    std::size_t layout = 0;
    for (const auto& e : analyzer::parameter_layout(cfg)) layout += e.size();
    EXPECT_EQ(analyzer::parameter_count(cfg), formula);
    EXPECT_EQ(layout, formula);
  }
  EXPECT_EQ(analyzer::parameter_count({16, 1, 1, 16}), 3296u);
}

TEST(Analyzer, InvalidConfigsRejected) {
  EXPECT_THROW((AnalyzerConfig{15, 1, 1, 16}.validate()), ConfigError);
  EXPECT_THROW((AnalyzerConfig{16, 3, 1, 16}.validate()), ConfigError);
  EXPECT_THROW((AnalyzerConfig{16, 1, 0, 16}.validate()), ConfigError);
}

TEST(Analyzer, CodecRoundTripIsBitExact) {
  Rng rng(5);
  const AnalyzerConfig cfg{16, 2, 2, 8};
  const auto net = analyzer::random_network(cfg, rng);
  const auto pv = analyzer::encode_params(net);
  const auto back = analyzer::encode_params(analyzer::decode_params(pv.values, cfg));
  ASSERT_EQ(pv.values.size(), back.values.size());
  EXPECT_EQ(std::memcmp(pv.values.data(), back.values.data(), pv.values.size() * sizeof(double)), 0);
}

TEST(Analyzer, DecodeLengthMismatchNamesBothLengths) {
  std::vector<double> v(100, 0.0);
  try {
    analyzer::decode_params(v, {});
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("3296"), std::string::npos);
    EXPECT_NE(msg.find("100"), std::string::npos);
  }
}

TEST(Analyzer, AttnBlockMatchesScalarOracle) {
  Rng rng(17);
  for (int heads : {1, 2, 4}) {
    const auto net = analyzer::random_network({16, heads, 1, 16}, rng);
    Matrix x(7, 16);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    const Matrix got = analyzer::attn_block(x, net.layers[0].inter, heads);
    EXPECT_LT(max_diff(got, oracle::attn_block(oracle::to_mat(x), net.layers[0].inter, heads)), 1e-9);
  }
}

TEST(Analyzer, TsAttnMatchesScalarOracleAcrossShapes) {
  Rng rng(23);
  for (int trial = 0; trial < 12; ++trial) {
    const AnalyzerConfig cfg{16, 1 + trial % 2, 1 + trial % 3, 16};
    const auto net = analyzer::random_network(cfg, rng);
    const Eigen::Index d = 1 + trial % 5, m = 2 + trial % 5;
    const auto obs = random_obs(rng, m, d);
    const auto got = analyzer::analyze(net, obs);
    const auto want = oracle::ts_attn(oracle::embed(obs, net.w_emb), net);
    EXPECT_LT(max_diff(got.indiv, want.indiv), 1e-9) << "trial " << trial;
    for (Eigen::Index c = 0; c < 16; ++c) EXPECT_NEAR(got.pop[c], want.pop[c], 1e-9);
  }
}

TEST(Analyzer, PieOutputInUnitInterval) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const auto obs = random_obs(rng, 9, 4);
    const auto p = analyzer::pie_normalize(obs);
    for (double v : p.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Analyzer, ConstantObjectiveMapsToHalf) {
  Rng rng(3);
  auto obs = random_obs(rng, 5, 2);
  obs.y.setConstant(7.0);
  const auto p = analyzer::pie_normalize(obs);
  for (Eigen::Index j = 0; j < 2; ++j) {
    for (Eigen::Index i = 0; i < 5; ++i) EXPECT_EQ(p(j, i, 1), 0.5);
  }
}

TEST(Analyzer, ObjectiveScaleInvariance) {
  Rng rng(8);
  const auto net = analyzer::random_network({}, rng);
  for (int t = 0; t < 5; ++t) {
    auto obs = random_obs(rng, 8, 3);
    const auto base = analyzer::analyze(net, obs);
    const double a = rng.uniform(1e-3, 1e3), b = rng.uniform(-1e4, 1e4);
    obs.y = (a * obs.y.array() + b).matrix();
    const auto scaled = analyzer::analyze(net, obs);
    EXPECT_LT((base.indiv - scaled.indiv).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Analyzer, SearchBoxAffineInvariance) {
  Rng rng(9);
  const auto net = analyzer::random_network({}, rng);
  const auto obs = random_obs(rng, 8, 3);
  const auto base = analyzer::analyze(net, obs);
  Observation moved = obs;
  for (Eigen::Index j = 0; j < 3; ++j) {
    const double s = rng.uniform(0.01, 100.0), t = rng.uniform(-50.0, 50.0);
    moved.X.col(j) = (obs.X.col(j).array() * s + t).matrix();
    moved.lb[j] = obs.lb[j] * s + t;
    moved.ub[j] = obs.ub[j] * s + t;
  }
  EXPECT_LT((base.indiv - analyzer::analyze(net, moved).indiv).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Analyzer, CandidatePermutationEquivariance) {
  Rng rng(10);
  const auto net = analyzer::random_network({16, 2, 2, 16}, rng);
  const auto obs = random_obs(rng, 7, 4);
  std::vector<Eigen::Index> perm(7);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  Observation p = obs;
  for (Eigen::Index i = 0; i < 7; ++i) {
    p.X.row(i) = obs.X.row(perm[i]);
    p.y[i] = obs.y[perm[i]];
  }
  const auto a = analyzer::analyze(net, obs), b = analyzer::analyze(net, p);
  for (Eigen::Index i = 0; i < 7; ++i) {
    EXPECT_LT((a.indiv.row(perm[i]) - b.indiv.row(i)).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_LT((a.pop - b.pop).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Analyzer, FeatureWidthIndependentOfShape) {
  Rng rng(11);
  const auto net = analyzer::random_network({}, rng);
  for (auto [m, d] : {std::pair<Eigen::Index, Eigen::Index>{2, 1}, {30, 20}, {5, 50}}) {
    const auto f = analyzer::analyze(net, random_obs(rng, m, d));
    EXPECT_EQ(f.pop.size(), 16);
    EXPECT_EQ(f.indiv.rows(), m);
    EXPECT_TRUE(f.indiv.allFinite());
  }
}

TEST(Analyzer, PositionalEncodingKnownValues) {
  const Matrix pe = analyzer::positional_encoding(3, 4);
  EXPECT_EQ(pe(0, 0), 0.0);
  EXPECT_EQ(pe(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(pe(2, 0), std::sin(2.0));
  EXPECT_DOUBLE_EQ(pe(2, 3), std::cos(2.0 / 100.0));
}

TEST(Analyzer, LayerNormZeroMeanUnitVariance) {
  Rng rng(12);
  Matrix x(4, 16);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal() * 3 + 1;
  const Matrix y = analyzer::layer_norm(x, Vector::Ones(16), Vector::Zero(16));
  for (Eigen::Index r = 0; r < 4; ++r) {
    EXPECT_NEAR(y.row(r).mean(), 0.0, 1e-12);
    const double var = (y.row(r).array() - y.row(r).mean()).square().mean();
    const double xvar = (x.row(r).array() - x.row(r).mean()).square().mean();
    EXPECT_NEAR(var, xvar / (xvar + 1e-5), 1e-12);
  }
}

TEST(Analyzer, InvalidObservationRejected) {
  Rng rng(1);
  const auto net = analyzer::random_network({}, rng);
  auto obs = random_obs(rng, 1, 2);
  EXPECT_THROW(analyzer::analyze(net, obs), ConfigError);
  obs = random_obs(rng, 4, 2);
  obs.lb[0] = obs.ub[0];
  EXPECT_THROW(analyzer::analyze(net, obs), ConfigError);
}

}  // namespace
