#include "ltk/error.hpp"
#include "ltk/problems.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace {

using ltk::problems::make_problem;
using ltk::problems::ProblemSpec;
using ltk::problems::random_spec;

ltk::Matrix at_offset(const ProblemSpec& s) {
  ltk::Matrix X(1, s.dimension);
  for (int j = 0; j < s.dimension; ++j) X(0, j) = s.offset[j];
  return X;
}

TEST(Problems, AllTwentyFourIdsEvaluateFinite) {
  for (int id = 1; id <= 24; ++id) {
    auto p = make_problem(random_spec(id, 5, 11));
    ltk::Rng rng(id);
    ltk::Matrix X(20, 5);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-5.0, 5.0);
    const ltk::Vector y = p.evaluate_batch(X);
    EXPECT_TRUE(y.allFinite()) << "function " << id;
    EXPECT_EQ(p.fe_count(), 20);
  }
}

TEST(Problems, UnknownIdNamesTheId) {
  try {
    random_spec(25, 3, 1);
    FAIL();
  } catch (const ltk::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("25"), std::string::npos);
  }
  EXPECT_THROW(random_spec(0, 3, 1), ltk::ConfigError);
}

TEST(Problems, SphereIsShiftedSquaredNorm) {
  const auto s = random_spec(1, 4, 5);
  auto p = make_problem(s);
  EXPECT_EQ(p.evaluate_batch(at_offset(s))[0], 0.0);
  ltk::Matrix X = at_offset(s);
  X(0, 2) += 0.5;
  EXPECT_DOUBLE_EQ(p.evaluate_batch(X)[0], 0.25);
}

TEST(Problems, UnimodalOptimaAtOffset) {
  for (int id : {1, 2, 3, 4, 6, 10, 11, 12, 13, 14, 15, 16, 17, 18, 20, 23}) {
    const auto s = random_spec(id, 3, 9);
    auto p = make_problem(s);
    EXPECT_NEAR(p.evaluate_batch(at_offset(s))[0], 0.0, 1e-9) << "function " << id;
  }
}

TEST(Problems, TinyValuesAreNotClipped) {
  const auto s = random_spec(1, 2, 5);
  auto p = make_problem(s);
  ltk::Matrix X = at_offset(s);
  X(0, 0) += 1e-8;
  const double f = p.evaluate_batch(X)[0];
  EXPECT_GT(f, 0.0);
  EXPECT_LT(f, 1e-12);
}

TEST(Problems, BudgetRejectsWholeBatchWithoutCharging) {
  auto p = make_problem(random_spec(1, 2, 5), 10);
  p.evaluate_batch(ltk::Matrix::Zero(8, 2));
  EXPECT_THROW(p.evaluate_batch(ltk::Matrix::Zero(3, 2)), ltk::BudgetExhausted);
  EXPECT_EQ(p.fe_count(), 8);
  p.evaluate_batch(ltk::Matrix::Zero(2, 2));
  EXPECT_EQ(p.fe_count(), 10);
}

TEST(Problems, BestSoFarTracksMinimum) {
  const auto s = random_spec(1, 2, 5);
  auto p = make_problem(s);
  ltk::Matrix X = ltk::Matrix::Constant(3, 2, 4.9);
  const double first = p.evaluate_batch(X).minCoeff();
  EXPECT_EQ(p.best_so_far(), first);
  p.evaluate_batch(at_offset(s));
  EXPECT_EQ(p.best_so_far(), 0.0);
  p.evaluate_batch(X);
  EXPECT_EQ(p.best_so_far(), 0.0);
}

TEST(Problems, OutOfBoxIsRejected) {
  auto p = make_problem(random_spec(1, 2, 5));
  EXPECT_THROW(p.evaluate_batch(ltk::Matrix::Constant(1, 2, 5.5)), ltk::Error);
  EXPECT_EQ(p.fe_count(), 0);
}

TEST(Problems, NoiseIsSeededAndReproducible) {
  ltk::problems::NoiseModel n{ltk::problems::NoiseModel::Kind::gaussian_multiplicative, 0.1};
  const auto s = random_spec(2, 3, 8, n);
  auto a = make_problem(s), b = make_problem(s);
  const ltk::Matrix X = ltk::Matrix::Constant(5, 3, 1.0);
  const ltk::Vector ya = a.evaluate_batch(X), yb = b.evaluate_batch(X);
  EXPECT_EQ(ya, yb);
  EXPECT_NE(ya[0], ya[1]);
  EXPECT_NEAR(a.peek(std::vector<double>{1.0, 1.0, 1.0}), ya[0], std::abs(ya[0]));
}

TEST(Problems, OffsetsInsideRadiusAndSeeded) {
  const auto a = random_spec(8, 10, 123), b = random_spec(8, 10, 123), c = random_spec(8, 10, 124);
  EXPECT_EQ(a.offset, b.offset);
  EXPECT_NE(a.offset, c.offset);
  for (double o : a.offset) EXPECT_LE(std::abs(o), ltk::problems::kOffsetRadius);
}

TEST(Problems, SplitIsDisjointAndComplete) {
  const auto split = ltk::problems::bbob_split();
  EXPECT_EQ(split.train.size(), 12u);
  EXPECT_EQ(split.test.size(), 12u);
  for (int id : split.train) EXPECT_EQ(split.test.count(id), 0u);
}

}  // namespace
