#include "ltk/error.hpp"
#include "ltk/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace {

TEST(Rng, SameSeedSameStream) {
  ltk::Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.uniform(), b.uniform());
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.normal(), b.normal());
}

TEST(Rng, SerializeResumesExactly) {
  ltk::Rng a(7);
  for (int i = 0; i < 13; ++i) a.normal();
  ltk::Rng b = ltk::Rng::deserialize(a.serialize());
  for (int i = 0; i < 50; ++i) ASSERT_EQ(a.uniform(), b.uniform());
}

TEST(Rng, UniformRangeAndIndexBounds) {
  ltk::Rng r(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(-2.0, 3.0);
    ASSERT_GE(u, -2.0);
    ASSERT_LT(u, 3.0);
    ASSERT_LT(r.index(7), 7u);
  }
  EXPECT_THROW(r.index(0), ltk::Error);
}

TEST(Rng, NormalMoments) {
  ltk::Rng r(3);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  // 6 standard errors
  EXPECT_NEAR(s / n, 0.0, 6.0 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 6.0 * std::sqrt(2.0 / n));
}

TEST(MixSeed, OrderSensitiveAndDistinct) {
  EXPECT_NE(ltk::mix_seed({1, 2}), ltk::mix_seed({2, 1}));
  EXPECT_EQ(ltk::mix_seed({1, 2, 3}), ltk::mix_seed({1, 2, 3}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t g = 0; g < 20; ++g) {
    for (std::uint64_t t = 0; t < 20; ++t) seen.insert(ltk::mix_seed({99, g, t}));
  }
  EXPECT_EQ(seen.size(), 400u);
}

}  // namespace
