#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "spoofprint/rng.hpp"

using namespace spoofprint;

TEST(Rng, SameSeedSameStream) {
  Xorshift64Star a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs |= x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, ZeroSeedIsUsable) {
  Xorshift64Star r(0);
  EXPECT_NE(r.next(), r.next());
}

TEST(Rng, BelowStaysInRange) {
  Xorshift64Star r(7);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto v = r.below(5);
    ASSERT_LT(v, 5u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_GT(c, 800);
}

TEST(Rng, UniformAndNormalMoments) {
  Xorshift64Star r(99);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(Rng, Fnv1aKnownValues) {
  static_assert(fnv1a64("") == 0xCBF29CE484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xAF63DC4C8601EC8CULL);
}
