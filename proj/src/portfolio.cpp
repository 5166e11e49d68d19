#include "stochastica/portfolio.hpp"

#include <algorithm>
#include <cmath>

#include "stochastica/errors.hpp"

namespace stochastica {

void Position::validate() const {
  if (!std::isfinite(quantity)) throw ValidationError("position '" + asset_id + "': quantity not finite");
  if (kind == PositionKind::promise && !maturity) {
    throw ValidationError("position '" + asset_id + "': promise without maturity");
  }
  if (maturity && !(*maturity >= 0.0)) {
    throw ValidationError("position '" + asset_id + "': maturity must be >= 0");
  }
}

DiscountCurve::DiscountCurve(std::vector<double> times, std::vector<double> rates)
    : times_(std::move(times)), rates_(std::move(rates)) {
  if (times_.empty() || times_.size() != rates_.size()) {
    throw ValidationError("discount curve: need equal, non-empty time and rate lists");
  }
  if (times_.front() != 0.0) throw ValidationError("discount curve: first node must be t=0");
  for (std::size_t k = 0; k < times_.size(); ++k) {
    if (!std::isfinite(rates_[k])) throw ValidationError("discount curve: non-finite rate");
    if (k > 0 && !(times_[k] > times_[k - 1])) {
      throw ValidationError("discount curve: times must be strictly increasing");
    }
  }
  cumulative_.resize(times_.size());
  cumulative_[0] = 0.0;
  for (std::size_t k = 1; k < times_.size(); ++k) {
    cumulative_[k] = cumulative_[k - 1] + rates_[k - 1] * (times_[k] - times_[k - 1]);
  }
}

DiscountCurve DiscountCurve::flat(double rate) { return DiscountCurve({0.0}, {rate}); }

double DiscountCurve::rate(double t) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  return rates_[k];
}

double DiscountCurve::cumulative(double t) const {
  // Negative times extend the first segment backwards.
  const auto it = std::upper_bound(times_.begin(), times_.end(), t);
  const std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  return cumulative_[k] + rates_[k] * (t - times_[k]);
}

double DiscountCurve::integral(double t0, double t1) const {
  if (t0 == t1) return 0.0;
  if (is_flat()) return rates_[0] * (t1 - t0);
  return cumulative(t1) - cumulative(t0);
}

double DiscountCurve::discount(double t0, double t1) const { return std::exp(-integral(t0, t1)); }

nlohmann::json DiscountCurve::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t k = 0; k < times_.size(); ++k) out.push_back({{"t", times_[k]}, {"r", rates_[k]}});
  return out;
}

DiscountCurve DiscountCurve::from_json(const nlohmann::json& j) {
  if (j.is_number()) return flat(j.get<double>());
  if (!j.is_array() || j.empty()) throw ValidationError("curve: expected a non-empty array of {t, r}");
  std::vector<double> t, r;
  for (const auto& node : j) {
    if (!node.contains("t") || !node.contains("r")) throw ValidationError("curve: node missing 't' or 'r'");
    t.push_back(node.at("t").get<double>());
    r.push_back(node.at("r").get<double>());
  }
  return DiscountCurve(std::move(t), std::move(r));
}

double annual_to_continuous(double annual_rate) {
  if (!(annual_rate > -1.0)) throw DomainError("annual_to_continuous: rate must exceed -1");
  return std::log1p(annual_rate);
}

double zero_coupon_price(const DiscountCurve& curve, double t, double maturity) {
  if (maturity < t) throw DomainError("zero_coupon_price: maturity before valuation time");
  return curve.discount(t, maturity);
}

namespace {

std::size_t coupon_count(double interval, double maturity) {
  if (!(interval > 0.0) || !(maturity > interval)) {
    throw DomainError("fixed_loan_coupon: need maturity > interval > 0");
  }
  const double periods = maturity / interval;
  const double rounded = std::round(periods);
  if (std::abs(periods - rounded) > 1e-9 * std::max(1.0, periods)) {
    throw DomainError("fixed_loan_coupon: maturity must be an integer multiple of the interval");
  }
  return static_cast<std::size_t>(rounded) - 1;
}

}  // namespace

double fixed_loan_coupon(double notional, double residual, double rate, double interval,
                         double maturity) {
  const std::size_t n = coupon_count(interval, maturity);
  if (std::abs(rate * maturity) < 1e-10) return (notional - residual) / static_cast<double>(n);
  // c = (X - X_r e^{-rT}) (1 - e^{-r dt}) / (e^{-r dt} - e^{-rT}), written with
  // expm1 so that small rates keep full precision.
  const double numerator = -std::expm1(-rate * interval);
  const double denominator = -std::exp(-rate * interval) * std::expm1(-rate * (maturity - interval));
  return (notional - residual * std::exp(-rate * maturity)) * numerator / denominator;
}

std::vector<Cashflow> fixed_loan_schedule(double notional, double residual, double rate,
                                          double interval, double maturity) {
  const double c = fixed_loan_coupon(notional, residual, rate, interval, maturity);
  const std::size_t n = coupon_count(interval, maturity);
  std::vector<Cashflow> flows;
  flows.reserve(n + 1);
  for (std::size_t k = 1; k <= n; ++k) flows.push_back({c, static_cast<double>(k) * interval});
  flows.push_back({residual, maturity});
  return flows;
}

double futures_value(double spot, double strike, const DiscountCurve& curve, double t,
                     double maturity, Side side) {
  if (maturity < t) throw DomainError("futures_value: maturity before valuation time");
  if (!(spot >= 0.0)) throw DomainError("futures_value: spot must be non-negative");
  const double value = spot - strike * zero_coupon_price(curve, t, maturity);
  return side == Side::long_side ? value : -value;
}

double pv_deterministic(const std::vector<Cashflow>& cashflows, const DiscountCurve& curve) {
  double pv = 0.0;
  for (const auto& cf : cashflows) {
    if (!(cf.time >= 0.0)) throw ValidationError("cashflow time must be >= 0");
    pv += cf.amount * curve.discount(0.0, cf.time);
  }
  return pv;
}

CashflowDocument load_cashflow_document(const nlohmann::json& j) {
  if (!j.contains("curve")) throw ValidationError("cashflow document: missing 'curve'");
  CashflowDocument doc{DiscountCurve::from_json(j.at("curve")), {}};
  if (j.contains("cashflows")) {
    for (const auto& cf : j.at("cashflows")) {
      Cashflow flow{cf.at("amount").get<double>(), cf.at("t").get<double>()};
      if (!(flow.time >= 0.0)) throw ValidationError("cashflow document: negative time");
      doc.cashflows.push_back(flow);
    }
  }
  return doc;
}

}  // namespace stochastica
