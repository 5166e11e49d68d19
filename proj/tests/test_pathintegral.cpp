#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "stochastica/numerics.hpp"
#include "stochastica/pathintegral.hpp"
#include "stochastica/portfolio.hpp"
#include "stochastica/pricing.hpp"
#include "stochastica/rng.hpp"

using namespace stochastica;

TEST(ShortTimeKernel, EulerTransitionLaw) {
  const ModelSpec m = make_vasicek(2.0, 0.05, 0.3);
  const ShortTimeKernel k = one_step_kernel(m, 0.0, 0.01);
  const double s = 0.02, mean = s + 2.0 * (0.05 - s) * 0.01, sd = 0.3 * 0.1;
  for (double to : {0.0, 0.02, 0.05}) {
    const double z = (to - mean) / sd;
    EXPECT_NEAR(k(s, to), std::exp(-0.5 * z * z) / (sd * std::sqrt(2 * std::numbers::pi)), 1e-12);
  }
  const Vector x = numerics::linspace(mean - 10 * sd, mean + 10 * sd, 2001);
  Vector p(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) p(i) = k(s, x(i));
  EXPECT_NEAR(numerics::trapezoid(x, p), 1.0, 1e-6);
}

TEST(ShortTimeKernel, SymmetricWithoutDrift) {
  const ModelSpec m = make_bm(0.0, 0.4);
  const ShortTimeKernel k(m, 0.0, 0.1);
  for (double d : {0.01, 0.1, 0.3}) EXPECT_DOUBLE_EQ(k(1.0, 1.0 + d), k(1.0, 1.0 - d));
}

TEST(ShortTimeKernel, DegenerateVolatility) {
  const ModelSpec m = make_bm(1.0, 0.0);
  const ShortTimeKernel k(m, 0.0, 0.1);
  EXPECT_TRUE(k.degenerate(3.0));
  EXPECT_DOUBLE_EQ(k.center(3.0), 3.1);
  EXPECT_THROW(k(3.0, 3.1), DomainError);
}

TEST(ShortTimeKernel, MatchesEvolveStepSampling) {
  const ModelSpec m = make_gbm(0.1, 0.4);
  const ShortTimeKernel k(m, 0.0, 0.05);
  const rng::CounterRng g(77, rng::Stream::test);
  const std::size_t n = 100000;
  std::vector<double> draws(n);
  for (std::size_t i = 0; i < n; ++i) draws[i] = evolve_step(m, 0.0, 50.0, g.normal(i, 0, 0), 0.05);
  const double d = oracle::ks_statistic(draws, [&](double x) { return norm_cdf((x - k.center(50.0)) / k.width(50.0)); });
  EXPECT_LT(d, oracle::ks_critical_1pct(n));
}

TEST(Propagate, ZeroStepsIsIdentity) {
  const ModelSpec m = make_bm(0.0, 1.0);
  const DensityGrid g = AnalyticDensity::gaussian(0, 1).on_grid(numerics::linspace(-8, 8, 161), 0.0);
  const DensityGrid out = propagate(ShortTimeKernel(m, 0.0, 0.1), g, 0);
  EXPECT_EQ(out.p(), g.p());
}

TEST(Propagate, BrownianSelfComposition) {
  const double sigma = 0.5, dt = 0.01;
  const std::size_t n = 50;
  const ModelSpec m = make_bm(0.0, sigma);
  const Vector x = numerics::linspace(-5, 5, 1001);
  const DensityGrid g = AnalyticDensity::gaussian(0, 0.09).on_grid(x, 0.0);
  const DensityGrid out = propagate(ShortTimeKernel(m, 0.0, dt), g, n);
  const auto want = AnalyticDensity::gaussian(0.0, 0.09 + n * sigma * sigma * dt);
  EXPECT_LT(l1_distance(out, want.function()), 1e-4);
  EXPECT_NEAR(out.t(), n * dt, 1e-15);
}

TEST(Propagate, LeakageAborts) {
  const ModelSpec m = make_bm(0.0, 1.0);
  const DensityGrid g = AnalyticDensity::gaussian(0, 0.01).on_grid(numerics::linspace(-0.5, 0.5, 101), 0.0);
  EXPECT_THROW(propagate(ShortTimeKernel(m, 0.0, 0.1), g, 10), NumericalError);
}

TEST(LatticeDensity, MatchesClosedForms) {
  struct Case {
    ModelSpec m;
    double s0;
  };
  for (const Case& c : {Case{make_bm(0.1, 0.3), 1.0}, Case{make_gbm(0.05, 0.2), 100.0},
                        Case{make_vasicek(1.0, 0.05, 0.02), 0.03}}) {
    PropagationReport report;
    const DensityGrid d = lattice_density(c.m, c.s0, 0.0, 1.0, {}, &report);
    EXPECT_LT(l1_distance(d, analytic_transition(c.m, 0.0, c.s0, 1.0).function()), 5e-3);
    EXPECT_LT(report.leaked_mass, 1e-8);
    EXPECT_GE(d.p().minCoeff(), 0.0);
  }
}

TEST(LatticeDensity, ChapmanKolmogorovByConstruction) {
  const ModelSpec m = make_vasicek(1.0, 0.05, 0.02);
  const Vector x = numerics::linspace(-0.1, 0.2, 301);
  const ShortTimeKernel k(m, 0.0, 0.01);
  const TransitionDensity ab{0.0, 0.03, propagate_from_point(k, 0.03, x, 40)};
  const TransitionDensity ac = compose_transition(ab, kernel_transition_matrix(k.shifted(40), x, 60));
  const DensityGrid direct = propagate_from_point(k, 0.03, x, 100);
  EXPECT_LT((ac.target.p() - direct.p()).cwiseAbs().maxCoeff(), 1e-9 * direct.p().maxCoeff());
}

TEST(LatticeDensity, ConvergesTowardForwardSolver) {
  const ModelSpec m = make_vasicek(1.0, 0.05, 0.02);
  double previous = 0.0;
  for (int level = 0; level < 3; ++level) {
    const int f = 1 << level;
    Resolution res;
    res.n_space = 200 * f + 1;
    res.n_steps = 100 * f;
    LatticeOptions lat;
    lat.n_space = res.n_space;
    lat.n_steps = 250 * f;
    const double gap = l1_distance(lattice_density(m, 0.03, 0.0, 1.0, lat), forward_density(m, 0.03, 0.0, 1.0, res));
    if (level == 0) EXPECT_LT(gap, 1e-2);
    if (level > 0) EXPECT_GE(previous / gap, 2.0);
    previous = gap;
  }
}

TEST(GreensFunction, MassIsTheDiscountFactor) {
  const DiscountCurve curve = DiscountCurve::flat(0.05);
  const ModelSpec rn = risk_neutralize(make_gbm(0.1, 0.25), curve);
  const GreensFunction g = greens_function(rn, curve, 0.0, 100.0, 2.0, 0.02);
  ASSERT_EQ(g.times.size(), 100);
  for (Eigen::Index k = 0; k < g.times.size(); k += 9)
    EXPECT_NEAR(g.total_mass(k), zero_coupon_price(curve, 0.0, g.times(k)), 1e-6);
  EXPECT_NEAR(g.total_mass(99), std::exp(-0.1), 1e-6);
  EXPECT_GE(g.values.minCoeff(), 0.0);
  EXPECT_NEAR(g.times(99), 2.0, 1e-14);
}

TEST(GreensFunction, ZeroRateIsTheTransitionDensity) {
  const DiscountCurve zero = DiscountCurve::flat(0.0);
  const ModelSpec m = make_bm(0.0, 0.3);
  const GreensFunction g = greens_function(m, zero, 0.0, 1.0, 1.0, 0.01);
  EXPECT_LT(l1_distance(g.terminal(), density_bm(1.0, 1.0, 0.0, 0.3).function()), 5e-3);
  EXPECT_EQ(g.times.size(), 100);
  // dt that does not divide the horizon is shortened
  EXPECT_EQ(greens_function(m, zero, 0.0, 1.0, 1.0, 0.3).times.size(), 4);
}

TEST(PiExpectation, NormalizationAndMoments) {
  const ModelSpec bm = make_bm(0.4, 0.6);
  const MCEstimate one = pi_expectation(bm, [](double) { return 1.0; }, 0.0, 1.0, 2.0, 0.1, 1000, 3);
  EXPECT_EQ(one.mean, 1.0);
  const MCEstimate mean = pi_expectation(bm, [](double s) { return s; }, 0.0, 1.0, 2.0, 0.1, 100000, 3);
  EXPECT_NEAR(mean.mean, 1.8, 3 * mean.std_error);
}

TEST(PiExpectation, AgreesWithPathSimulation) {
  const ModelSpec m = make_gbm(0.05, 0.3);
  auto f = [](double s) { return std::max(s - 100.0, 0.0); };
  const MCEstimate a = pi_expectation(m, f, 0.0, 100.0, 1.0, 1.0 / 64, 100000, 5, {2});
  const MCEstimate b = stream_expectation(m, Vector::Constant(1, 100.0), TimeGrid::over(0, 1, 64), 100000, 5,
                                          [&](const PathView& p) { return f(p.terminal()); }, {2});
  EXPECT_NE(a.mean, b.mean);  // independent streams
  EXPECT_LT(std::abs(a.mean - b.mean), 3 * std::hypot(a.std_error, b.std_error));
}
