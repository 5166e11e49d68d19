#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochastica/core.hpp"
#include "stochastica/errors.hpp"
#include "stochastica/mc.hpp"
#include "stochastica/models.hpp"
#include "stochastica/pathintegral.hpp"
#include "stochastica/portfolio.hpp"

namespace stochastica {

enum class PayoffKind { call, put, digital, constant, forward, table, custom };

/// Terminal payoff P(S) paid at `expiry`, optionally with a continuous payoff
/// rate p(t, S) paid on [0, expiry]. Valuation time is 0.
struct PayoffSpec {
  PayoffKind kind = PayoffKind::custom;
  double expiry = 0.0;
  double strike = 0.0;
  double amount = 1.0;  // digital and constant payouts
  std::function<double(double)> terminal;
  std::function<double(double, double)> stream;
  /// Points where P has a kink or jump.
  std::vector<double> breakpoints;
  nlohmann::json description;

  static PayoffSpec call(double strike, double expiry);
  static PayoffSpec put(double strike, double expiry);
  /// amount if S > strike, else 0.
  static PayoffSpec digital(double strike, double expiry, double amount = 1.0);
  static PayoffSpec constant(double amount, double expiry);
  /// S - K.
  static PayoffSpec forward(double strike, double expiry);
  /// Linear interpolation of (s, v), flat outside.
  static PayoffSpec table(std::vector<double> s, std::vector<double> v, double expiry);
  static PayoffSpec custom(std::function<double(double)> terminal, double expiry,
                           std::vector<double> breakpoints = {});

  PayoffSpec& with_stream(std::function<double(double, double)> rate);
  double operator()(double s) const { return terminal(s); }
};

/// a P1 + b P2 (same expiry).
PayoffSpec combine(double a, const PayoffSpec& p1, double b, const PayoffSpec& p2);

/// {"kind": "call"|"put"|"digital"|"constant"|"forward"|"table", "strike", "expiry",
///  "amount", "s": [...], "v": [...]}
PayoffSpec payoff_from_json(const nlohmann::json& j);

/// Drift replaced by r(t) S (per asset), volatility unchanged. Models that are
/// not price processes need an explicit risk-neutral drift. Idempotent.
ModelSpec risk_neutralize(const ModelSpec& model, const DiscountCurve& curve,
                          std::optional<ModelSpec::ScalarMap> drift_override = std::nullopt);
bool is_risk_neutral(const ModelSpec& model);

template <typename Scalar>
Scalar norm_cdf(const Scalar& x) {
  using std::erfc;
  using std::sqrt;
  return erfc(-x / sqrt(Scalar(2))) / Scalar(2);
}

template <typename Scalar>
Scalar norm_pdf(const Scalar& x) {
  using std::exp;
  using std::sqrt;
  using std::acos;
  return exp(-x * x / Scalar(2)) / sqrt(Scalar(2) * acos(Scalar(-1)));
}

enum class OptionKind { call, put };

struct BSParams {
  double s = 0.0;
  double k = 0.0;
  double r = 0.0;
  double sigma = 0.0;
  double t = 0.0;

  void validate() const;
};

template <typename Scalar>
Scalar bs_d_plus(const Scalar& s, const Scalar& k, const Scalar& r, const Scalar& sigma,
                 const Scalar& t) {
  using std::log;
  using std::sqrt;
  return (log(s / k) + (r + sigma * sigma / Scalar(2)) * t) / (sigma * sqrt(t));
}

template <typename Scalar>
Scalar bs_d_minus(const Scalar& s, const Scalar& k, const Scalar& r, const Scalar& sigma,
                  const Scalar& t) {
  using std::sqrt;
  return bs_d_plus(s, k, r, sigma, t) - sigma * sqrt(t);
}

/// S Phi(d+) - K e^{-rt} Phi(d-), with the deterministic limit
/// (S - K e^{-rt})^+ when sigma or t is zero.
template <typename Scalar>
Scalar bs_call(const Scalar& s, const Scalar& k, const Scalar& r, const Scalar& sigma,
               const Scalar& t) {
  using std::exp;
  const Scalar df = exp(-r * t);
  if (sigma == Scalar(0) || t == Scalar(0)) {
    const Scalar intrinsic = s - k * df;
    return intrinsic > Scalar(0) ? intrinsic : Scalar(0);
  }
  return s * norm_cdf(bs_d_plus(s, k, r, sigma, t)) -
         k * df * norm_cdf(bs_d_minus(s, k, r, sigma, t));
}

template <typename Scalar>
Scalar bs_put(const Scalar& s, const Scalar& k, const Scalar& r, const Scalar& sigma,
              const Scalar& t) {
  using std::exp;
  return bs_call(s, k, r, sigma, t) - s + k * exp(-r * t);
}

double bs_price(const BSParams& p, OptionKind kind = OptionKind::call);

/// m = ln(S / (K e^{-rt})).
double moneyness(const BSParams& p);
/// f / (K e^{-rt}) = e^m Phi(m/z + z/2) - Phi(m/z - z/2) with z = sigma sqrt(t).
double bs_call_moneyness(double m, double z);

struct GreeksReport {
  double delta = 0.0;
  double kappa = 0.0;
  double gamma = 0.0;
  /// Delta and kappa in the expanded form that keeps the terms proportional
  /// to S n(d+) - K e^{-rt} n(d-), n the standard normal density.
  double delta_expanded = 0.0;
  double kappa_expanded = 0.0;
  /// S n(d+) - K e^{-rt} n(d-); zero up to rounding.
  double identity_residual = 0.0;
  /// t == 0 or sigma == 0: limit values are returned.
  bool degenerate = false;
};

GreeksReport bs_greeks(const BSParams& p, OptionKind kind = OptionKind::call);

struct MCPrice {
  MCEstimate estimate;
  /// Hash of the risk-neutralized model actually simulated.
  std::uint64_t model_hash = 0;
  std::size_t n_steps = 0;
};

/// e^{-R(0,T)} E P(S_T) + sum_m p(t_m, S_m) e^{-R(0,t_m)} dt under
/// risk_neutralize(model, curve). dt is shortened to divide the expiry.
MCPrice pv_mc(const ModelSpec& model, const DiscountCurve& curve, const PayoffSpec& payoff,
              double s0, double dt, std::size_t n_paths, std::uint64_t seed,
              SimulationOptions opts = {});

struct PdeGrid {
  Eigen::Index n_space = 3201;  // odd, so ln S0 is the centre node
  std::size_t n_steps = 400;
  double width_sd = 8.0;
};

struct PdeSolution {
  Vector s;
  Vector f;
  double s0 = 0.0;
  double value = 0.0;  // f(0, S0)
  double at(double s) const;
};

using LocalVol = std::function<double(double t, double s)>;

/// Black-Scholes-Merton equation with relative volatility sigma(t, S) solved
/// backward from the payoff on a log-price grid centred at S0 (Crank-Nicolson,
/// two implicit half steps at the start, zero curvature in S at the edges).
PdeSolution pv_pde(const PayoffSpec& payoff, const DiscountCurve& curve, const LocalVol& sigma,
                   double s0, const PdeGrid& grid = {});

struct GreenPrice {
  double value = 0.0;
  /// Rough bound on the payoff mass the lattice cannot see.
  double leakage_bound = 0.0;
  std::vector<std::string> warnings;
};

/// Integral of G(T, S) P(S) dS (plus the time integral of G p for streams)
/// with cubic interpolation of G and Gauss-Legendre pieces split at payoff
/// breakpoints.
GreenPrice pv_green(const GreensFunction& green, const PayoffSpec& payoff);

}  // namespace stochastica
