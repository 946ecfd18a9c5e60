#include "mbul/common.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

namespace mbul {
namespace {

TEST(Errors, HierarchyMapsToOneBase) {
  EXPECT_THROW(
      { throw ConfigError("bad config"); }, Error);
  EXPECT_THROW(
      { throw DataError("bad data"); }, Error);
  try {
    check_config(false, "x must be positive");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_STREQ(e.what(), "x must be positive");
  }
  EXPECT_NO_THROW(check(true, ""));
  EXPECT_NO_THROW(check_data(true, ""));
}

TEST(Seeding, DeriveSeedIsDeterministicAndSensitive) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 2, 4));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(2, 2, 3));
  // Many derived seeds from one base stay distinct.
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 10000; ++i) seen.insert(derive_seed(42, i));
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(Seeding, Fnv1aKnownVectors) {
  // Standard 64-bit FNV-1a test vectors.
  EXPECT_EQ(fnv1a(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ull);
}

TEST(Rng, UniformRangeAndMean) {
  Rng rng(123);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform();
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
    sum += x;
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(Rng, UniformIntInclusiveBoundsAndCoverage) {
  Rng rng(7);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 10000; ++i) {
    const auto v = rng.uniform_int(0, 9);
    ASSERT_GE(v, 0);
    ASSERT_LE(v, 9);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 10u);  // all values hit, both bounds inclusive
  EXPECT_EQ(rng.uniform_int(5, 5), 5);
  EXPECT_THROW(rng.uniform_int(3, 2), Error);
  // Negative ranges work too.
  for (int i = 0; i < 100; ++i) {
    const auto v = rng.uniform_int(-4, -1);
    ASSERT_GE(v, -4);
    ASSERT_LE(v, -1);
  }
}

TEST(Rng, BernoulliFrequency) {
  Rng rng(99);
  int hits = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.05) ? 1 : 0;
  EXPECT_NEAR(hits / static_cast<double>(n), 0.05, 0.003);
}

TEST(Rng, NormalMoments) {
  Rng rng(2024);
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal(1.0, 2.0);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  EXPECT_NEAR(mean, 1.0, 0.02);
  EXPECT_NEAR(std::sqrt(var), 2.0, 0.02);
}

TEST(Rng, StreamsAreReproducible) {
  Rng a(555), b(555), c(556);
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.bits();
    EXPECT_EQ(x, b.bits());
    any_diff = any_diff || (x != c.bits());
  }
  EXPECT_TRUE(any_diff);
}

TEST(Rng, ShuffleDeterministicPermutation) {
  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, v2 = v1, v3 = v1;
  Rng r1(31), r2(31), r3(32);
  shuffle(v1, r1);
  shuffle(v2, r2);
  shuffle(v3, r3);
  EXPECT_EQ(v1, v2);
  EXPECT_NE(v1, v3);
  std::sort(v1.begin(), v1.end());
  EXPECT_EQ(v1, (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9}));
}

}  // namespace
}  // namespace mbul
