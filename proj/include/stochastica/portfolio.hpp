#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace stochastica {

enum class PositionKind { spot, promise };

/// Exercise flag of an optional promise. Stored for bookkeeping; no
/// exercise decision is ever derived from it.
enum class Optionality { none, holder, writer };

/// A holding in the asset space: either the asset itself or a promise to
/// receive it at a maturity.
struct Position {
  std::string asset_id;
  double quantity = 0.0;
  PositionKind kind = PositionKind::spot;
  std::optional<double> maturity;
  Optionality optionality = Optionality::none;

  void validate() const;
};

struct Cashflow {
  double amount = 0.0;
  double time = 0.0;  // years from valuation date
};

/// Continuously compounded short rate, piecewise constant on a time grid.
/// Segment k holds rate rates[k] on [times[k], times[k+1]); the last segment
/// extends to infinity. times[0] must be 0.
class DiscountCurve {
 public:
  DiscountCurve(std::vector<double> times, std::vector<double> rates);

  static DiscountCurve flat(double rate);

  double rate(double t) const;
  /// R(t0, t1) = integral of r over [t0, t1]; antisymmetric, additive.
  double integral(double t0, double t1) const;
  double discount(double t0, double t1) const;
  bool is_flat() const { return rates_.size() == 1; }

  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& rates() const { return rates_; }

  nlohmann::json to_json() const;
  static DiscountCurve from_json(const nlohmann::json& j);

 private:
  double cumulative(double t) const;

  std::vector<double> times_;
  std::vector<double> rates_;
  std::vector<double> cumulative_;  // R(0, times_[k])
};

/// r = ln(1 + r1).
double annual_to_continuous(double annual_rate);

/// e^{-R(t, maturity)}.
double zero_coupon_price(const DiscountCurve& curve, double t, double maturity);

/// Fixed coupon c of a loan with notional X repaid by N = maturity/interval - 1
/// coupons at n*interval and a residual at maturity, all discounted at the
/// constant rate r. Uses the analytic r -> 0 limit (X - X_r)/N when
/// |r * maturity| < 1e-10.
double fixed_loan_coupon(double notional, double residual, double rate, double interval,
                         double maturity);

/// Coupon and residual payments of the loan above, as seen by the lender.
std::vector<Cashflow> fixed_loan_schedule(double notional, double residual, double rate,
                                          double interval, double maturity);

enum class Side { long_side, short_side };

/// Value at t of a futures contract on an asset with spot S and delivery price K at T.
double futures_value(double spot, double strike, const DiscountCurve& curve, double t,
                     double maturity, Side side = Side::long_side);

double pv_deterministic(const std::vector<Cashflow>& cashflows, const DiscountCurve& curve);

/// {"curve": [{"t":..,"r":..}, ...], "cashflows": [{"amount":..,"t":..}, ...]}
struct CashflowDocument {
  DiscountCurve curve;
  std::vector<Cashflow> cashflows;
};
CashflowDocument load_cashflow_document(const nlohmann::json& j);

}  // namespace stochastica
