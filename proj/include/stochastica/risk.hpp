#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stochastica/core.hpp"
#include "stochastica/pricing.hpp"

namespace stochastica {

/// Price fractions x_i = S_i / S_P and per-asset volatilities of independent
/// assets.
struct IndexInputs {
  Vector x;
  Vector sigma;
};

struct IndexWeights {
  Vector w;
  double variance = 0.0;  // effective sigma-bar^2
  double lambda = 0.0;    // Lagrange multiplier of sum w_i x_i = 1
  /// Some sigma_i == 0: all weight goes to the riskless asset(s).
  bool degenerate = false;
  std::vector<Eigen::Index> riskless;
};

/// Minimum of sum w_i^2 x_i^2 sigma_i^2 subject to sum w_i x_i = 1:
/// w_i = lambda / (2 x_i sigma_i^2), 1 / sigma-bar^2 = sum 1 / sigma_i^2.
IndexWeights index_weights(const IndexInputs& in);

double portfolio_variance(const Vector& w, const Vector& x, const Vector& sigma);

struct HedgeRatio {
  double delta = 0.0;
  double left_derivative = 0.0;
  double right_derivative = 0.0;
  std::vector<std::string> warnings;
};

/// delta = df/dS at s0 by Ridders-extrapolated central differences. Warns when
/// the one-sided derivatives differ by more than 1e-3 relative.
HedgeRatio delta_hedge(const std::function<double(double)>& price, double s0);
/// Hedge ratio from an analytic delta.
HedgeRatio delta_hedge(const GreeksReport& greeks);

enum class Greek { delta, kappa, gamma };

struct InstrumentGreeks {
  double delta = 0.0;
  double kappa = 0.0;
  double gamma = 0.0;

  double get(Greek g) const;
};

enum class Normalization { first_weight, unit_value };

struct NeutralizeOptions {
  /// Subset of {kappa, gamma}; delta is always absorbed by the underlying.
  std::vector<Greek> targets;
  Normalization normalization = Normalization::first_weight;
  /// Instrument values, required for unit_value.
  std::vector<double> values;
};

struct HedgeReport {
  Vector alpha;
  double delta = 0.0;  // short position in the underlying
  InstrumentGreeks residual;
  double condition_number = 1.0;

  nlohmann::json to_json() const;
};

/// Weights alpha with sum alpha_i g_i = 0 for every targeted greek and the
/// normalization row, solved by SVD (minimum norm when more instruments than
/// constraints). delta = sum alpha_i Delta_i.
HedgeReport neutralize(const std::vector<InstrumentGreeks>& instruments,
                       const NeutralizeOptions& opts = {});

Greek greek_from_string(const std::string& name);
std::string to_string(Greek g);

}  // namespace stochastica
