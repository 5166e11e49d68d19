#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "stochastica/errors.hpp"
#include "stochastica/portfolio.hpp"

using namespace stochastica;

namespace {

double loan_balance(double c, double residual, double rate, double interval, double maturity) {
  const int n = static_cast<int>(std::lround(maturity / interval)) - 1;
  double pv = residual * std::exp(-rate * maturity);
  for (int i = 1; i <= n; ++i) pv += c * std::exp(-rate * i * interval);
  return pv;
}

DiscountCurve random_curve(oracle::Uniform& u) {
  std::vector<double> times{0.0}, rates{u(-0.02, 0.1)};
  const int nodes = u.integer(0, 5);
  for (int i = 0; i < nodes; ++i) {
    times.push_back(times.back() + u(0.1, 2.0));
    rates.push_back(u(-0.02, 0.1));
  }
  return DiscountCurve(times, rates);
}

}  // namespace

TEST(AnnualToContinuous, Examples) {
  EXPECT_EQ(annual_to_continuous(0.0), 0.0);
  EXPECT_NEAR(annual_to_continuous(std::exp(1.0) - 1.0), 1.0, 1e-15);
  EXPECT_NEAR(annual_to_continuous(0.10), 0.09531017980432486, 1e-15);
  EXPECT_NEAR(std::expm1(annual_to_continuous(0.37)), 0.37, 1e-15);
  EXPECT_THROW(annual_to_continuous(-1.0), DomainError);
}

TEST(ZeroCoupon, Examples) {
  EXPECT_EQ(zero_coupon_price(DiscountCurve::flat(0.0), 0.0, 7.0), 1.0);
  EXPECT_EQ(zero_coupon_price(DiscountCurve::flat(0.05), 3.0, 3.0), 1.0);
  EXPECT_NEAR(zero_coupon_price(DiscountCurve::flat(std::log(1.1)), 1.0, 3.0), 1.0 / (1.1 * 1.1), 1e-15);
  EXPECT_THROW(zero_coupon_price(DiscountCurve::flat(0.05), 2.0, 1.0), DomainError);
}

TEST(ZeroCoupon, CompositionOnPiecewiseCurves) {
  oracle::Uniform u(17);
  for (int trial = 0; trial < 500; ++trial) {
    const DiscountCurve c = random_curve(u);
    const double t = u(0, 3), t1 = t + u(0, 4), t2 = t1 + u(0, 4);
    const double direct = zero_coupon_price(c, t, t2);
    EXPECT_NEAR(zero_coupon_price(c, t, t1) * zero_coupon_price(c, t1, t2) / direct, 1.0, 1e-12);
  }
}

TEST(DiscountCurve, IntegralIsAdditiveAndAntisymmetric) {
  const DiscountCurve c({0.0, 1.0, 2.5}, {0.01, 0.03, 0.02});
  EXPECT_EQ(c.integral(1.7, 1.7), 0.0);
  EXPECT_NEAR(c.integral(0.0, 4.0), 0.01 + 0.03 * 1.5 + 0.02 * 1.5, 1e-15);
  EXPECT_NEAR(c.integral(0.3, 2.0) + c.integral(2.0, 3.1), c.integral(0.3, 3.1), 1e-15);
  EXPECT_NEAR(c.integral(3.0, 0.5), -c.integral(0.5, 3.0), 1e-15);
  EXPECT_THROW(DiscountCurve({0.5}, {0.01}), ValidationError);
  EXPECT_THROW(DiscountCurve({0.0, 1.0, 1.0}, {0.0, 0.0, 0.0}), ValidationError);
}

TEST(DiscountCurve, JsonRoundTrip) {
  const DiscountCurve c({0.0, 1.0}, {0.01, 0.03});
  const DiscountCurve back = DiscountCurve::from_json(c.to_json());
  EXPECT_EQ(back.times(), c.times());
  EXPECT_EQ(back.rates(), c.rates());
}

TEST(FixedLoanCoupon, MatchesRootFindOracle) {
  const double c = fixed_loan_coupon(100.0, 0.0, 0.05, 1.0, 5.0);
  EXPECT_NEAR(c, oracle::loan_coupon_root(100.0, 0.0, 0.05, 1.0, 5.0), 1e-12);
}

TEST(FixedLoanCoupon, TrivialCases) {
  EXPECT_NEAR(fixed_loan_coupon(100.0, 100.0 * std::exp(0.05 * 5.0), 0.05, 1.0, 5.0), 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(fixed_loan_coupon(100.0, 0.0, 0.0, 1.0, 5.0), 25.0);
  EXPECT_NEAR(fixed_loan_coupon(100.0, 0.0, 1e-12, 1.0, 5.0), 25.0, 1e-9);
  EXPECT_THROW(fixed_loan_coupon(100.0, 0.0, 0.05, 1.0, 1.0), DomainError);
  EXPECT_THROW(fixed_loan_coupon(100.0, 0.0, 0.05, 1.0, 4.5), DomainError);
}

TEST(FixedLoanCoupon, BalanceIdentityOnRandomInputs) {
  oracle::Uniform u(23);
  for (int trial = 0; trial < 2000; ++trial) {
    const double x = u(1, 1e6), xr = u(0, 1.5) * x, r = u(-0.05, 0.2), dt = u(0.05, 2.0);
    const double maturity = dt * u.integer(2, 60);
    const double c = fixed_loan_coupon(x, xr, r, dt, maturity);
    EXPECT_NEAR(loan_balance(c, xr, r, dt, maturity) / x, 1.0, 1e-12);
  }
}

TEST(FixedLoanSchedule, NetPresentValueIsZero) {
  const auto flows = fixed_loan_schedule(250.0, 40.0, 0.04, 0.5, 6.0);
  EXPECT_EQ(flows.size(), 12u);
  EXPECT_NEAR(pv_deterministic(flows, DiscountCurve::flat(0.04)) - 250.0, 0.0, 1e-10);
}

TEST(FuturesValue, Examples) {
  const DiscountCurve c = DiscountCurve::flat(0.05);
  EXPECT_EQ(futures_value(80.0, 0.0, c, 0.0, 2.0), 80.0);
  EXPECT_EQ(futures_value(80.0, 80.0, DiscountCurve::flat(0.0), 0.0, 2.0), 0.0);
  EXPECT_NEAR(futures_value(100.0, 95.0, c, 0.0, 1.0), 100.0 - 95.0 * std::exp(-0.05), 1e-12);
  EXPECT_EQ(futures_value(100.0, 95.0, c, 0.0, 1.0, Side::short_side), -futures_value(100.0, 95.0, c, 0.0, 1.0));
  EXPECT_THROW(futures_value(100.0, 95.0, c, 2.0, 1.0), DomainError);
}

TEST(PvDeterministic, LinearAndAdditive) {
  oracle::Uniform u(31);
  const DiscountCurve c = random_curve(u);
  EXPECT_EQ(pv_deterministic({}, c), 0.0);
  EXPECT_DOUBLE_EQ(pv_deterministic({{1.0, 3.0}}, c), zero_coupon_price(c, 0.0, 3.0));
  std::vector<Cashflow> a, b;
  for (int i = 0; i < 20; ++i) a.push_back({u(-10, 10), u(0, 10)});
  for (int i = 0; i < 15; ++i) b.push_back({u(-10, 10), u(0, 10)});
  std::vector<Cashflow> both = a;
  both.insert(both.end(), b.begin(), b.end());
  EXPECT_NEAR(pv_deterministic(both, c), pv_deterministic(a, c) + pv_deterministic(b, c), 1e-12);
  EXPECT_THROW(pv_deterministic({{1.0, -1.0}}, c), ValidationError);
}

TEST(Position, Validation) {
  Position p{"bond", 2.0, PositionKind::promise, 1.5, Optionality::holder};
  EXPECT_NO_THROW(p.validate());
  p.maturity.reset();
  EXPECT_THROW(p.validate(), ValidationError);
  EXPECT_THROW((Position{"x", NAN}).validate(), ValidationError);
}

TEST(CashflowDocument, Loads) {
  const auto doc = load_cashflow_document(nlohmann::json::parse(
      R"({"curve": [{"t": 0, "r": 0.02}], "cashflows": [{"amount": 5, "t": 1}, {"amount": 105, "t": 2}]})"));
  EXPECT_EQ(doc.cashflows.size(), 2u);
  EXPECT_NEAR(pv_deterministic(doc.cashflows, doc.curve), 5 * std::exp(-0.02) + 105 * std::exp(-0.04), 1e-12);
  EXPECT_THROW(load_cashflow_document(nlohmann::json::parse(R"({"cashflows": []})")), ValidationError);
}
