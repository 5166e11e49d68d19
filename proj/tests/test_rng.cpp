#include <gtest/gtest.h>

#include <cmath>

#include <boost/math/distributions/normal.hpp>

#include "stochastica/pricing.hpp"
#include "stochastica/rng.hpp"

using namespace stochastica;
using namespace stochastica::rng;

// Known-answer vectors of the reference Philox4x32-10 implementation.
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32_10({0, 0, 0, 0}, {0, 0}), (Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(InverseNormal, MatchesBoostQuantile) {
  const boost::math::normal_distribution<double> n;
  for (double p : {1e-300, 1e-20, 1e-8, 0.001, 0.02425, 0.1, 0.3, 0.5, 0.574, 0.9, 0.975, 0.999999, 1 - 1e-12}) {
    const double ref = boost::math::quantile(n, p);
    EXPECT_NEAR(inverse_normal_cdf(p), ref, 1e-14 * std::max(1.0, std::abs(ref))) << p;
  }
}

TEST(InverseNormal, RoundTripsThroughCdf) {
  for (int i = 1; i < 1000; ++i) {
    const double p = i / 1000.0;
    EXPECT_NEAR(norm_cdf(inverse_normal_cdf(p)), p, 1e-15);
  }
}

TEST(CounterRng, PureFunctionOfIndices) {
  const CounterRng a(42, Stream::paths, 3), b(42, Stream::paths, 3);
  EXPECT_EQ(a.normal(7, 11, 2), b.normal(7, 11, 2));
  const double first = a.normal(1000, 5, 1);
  for (int i = 0; i < 10; ++i) a.normal(static_cast<std::uint64_t>(i), 0, 0);
  EXPECT_EQ(a.normal(1000, 5, 1), first);
}

TEST(CounterRng, BulkNormalsMatchSingleDraws) {
  const CounterRng g(9, Stream::paths, 3);
  std::vector<double> bulk(31);
  g.normals(4, 3, bulk.size(), bulk.data());  // starts at step 1, component 0
  for (std::size_t i = 0; i < bulk.size(); ++i) {
    const std::uint32_t q = static_cast<std::uint32_t>(3 + i);
    EXPECT_EQ(bulk[i], g.normal(4, q / 3, q % 3)) << i;
  }
}

TEST(CounterRng, StreamsAndSeedsDiffer) {
  const CounterRng p(1, Stream::paths), k(1, Stream::kernel_sampler), other(2, Stream::paths);
  EXPECT_NE(p.uniform(0, 0, 0), k.uniform(0, 0, 0));
  EXPECT_NE(p.uniform(0, 0, 0), other.uniform(0, 0, 0));
}

TEST(CounterRng, UniformMoments) {
  const CounterRng g(5, Stream::test);
  const int n = 200000;
  double m1 = 0, m2 = 0, lag = 0, prev = 0;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform(static_cast<std::uint64_t>(i / 50), static_cast<std::uint32_t>(i % 50), 0);
    EXPECT_GT(u, 0.0);
    EXPECT_LT(u, 1.0);
    m1 += u;
    m2 += u * u;
    lag += (u - 0.5) * (prev - 0.5);
    prev = u;
  }
  m1 /= n;
  m2 /= n;
  EXPECT_NEAR(m1, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(m2 - m1 * m1, 1.0 / 12, 0.002);
  EXPECT_NEAR(lag / n, 0.0, 5 * (1.0 / 12) / std::sqrt(n));
}
