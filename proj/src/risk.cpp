#include "stochastica/risk.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SVD>

#include "stochastica/errors.hpp"

namespace stochastica {

IndexWeights index_weights(const IndexInputs& in) {
  const Eigen::Index n = in.x.size();
  if (n == 0 || in.sigma.size() != n)
    throw ValidationError("index weights: x and sigma must be non-empty and of equal length");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(in.x(i) > 0.0) || !std::isfinite(in.x(i)))
      throw DomainError("index weights: x_" + std::to_string(i) + " must be > 0");
    if (!(in.sigma(i) >= 0.0) || !std::isfinite(in.sigma(i)))
      throw DomainError("index weights: sigma_" + std::to_string(i) + " must be >= 0");
  }
  IndexWeights out;
  out.w = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    if (in.sigma(i) == 0.0) out.riskless.push_back(i);
  if (!out.riskless.empty()) {
    out.degenerate = true;
    const double share = 1.0 / static_cast<double>(out.riskless.size());
    for (Eigen::Index i : out.riskless) out.w(i) = share / in.x(i);
    return out;
  }
  const Vector inv_var = in.sigma.array().square().inverse().matrix();
  out.variance = 1.0 / inv_var.sum();
  out.lambda = 2.0 * out.variance;
  out.w = (out.lambda / 2.0) * inv_var.cwiseQuotient(in.x);
  return out;
}

double portfolio_variance(const Vector& w, const Vector& x, const Vector& sigma) {
  if (w.size() != x.size() || w.size() != sigma.size())
    throw ValidationError("portfolio variance: w, x and sigma must have equal length");
  return (w.array() * x.array() * sigma.array()).square().sum();
}

namespace {

// Ridders' polynomial extrapolation of central differences.
double ridders_derivative(const std::function<double(double)>& f, double x, double h) {
  constexpr int kTableau = 10;
  constexpr double kShrink = 1.4, kShrink2 = kShrink * kShrink;
  double a[kTableau][kTableau];
  a[0][0] = (f(x + h) - f(x - h)) / (2.0 * h);
  double best = a[0][0];
  double err = std::numeric_limits<double>::max();
  for (int i = 1; i < kTableau; ++i) {
    h /= kShrink;
    a[0][i] = (f(x + h) - f(x - h)) / (2.0 * h);
    double fac = kShrink2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
      fac *= kShrink2;
      const double e = std::max(std::abs(a[j][i] - a[j - 1][i]), std::abs(a[j][i] - a[j - 1][i - 1]));
      if (e <= err) {
        err = e;
        best = a[j][i];
      }
    }
    if (std::abs(a[i][i] - a[i - 1][i - 1]) >= 2.0 * err) break;
  }
  return best;
}

}  // namespace

HedgeRatio delta_hedge(const std::function<double(double)>& price, double s0) {
  if (!std::isfinite(s0)) throw DomainError("delta hedge: S0 must be finite");
  const double scale = std::max(std::abs(s0), 1.0);
  HedgeRatio out;
  out.delta = ridders_derivative(price, s0, 0.01 * scale);
  const double h = 1e-3 * scale;
  const double f0 = price(s0);
  out.right_derivative = (-3.0 * f0 + 4.0 * price(s0 + h) - price(s0 + 2.0 * h)) / (2.0 * h);
  out.left_derivative = (3.0 * f0 - 4.0 * price(s0 - h) + price(s0 - 2.0 * h)) / (2.0 * h);
  if (!std::isfinite(out.delta)) throw NumericalError("delta hedge: non-finite derivative");
  const double gap = std::abs(out.right_derivative - out.left_derivative);
  const double ref = std::max({std::abs(out.left_derivative), std::abs(out.right_derivative), 1e-12});
  if (gap > 1e-3 * ref) {
    std::ostringstream msg;
    msg << "price looks non-differentiable at S0=" << s0 << ": one-sided derivatives "
        << out.left_derivative << " and " << out.right_derivative;
    out.warnings.push_back(msg.str());
  }
  return out;
}

HedgeRatio delta_hedge(const GreeksReport& greeks) {
  HedgeRatio out;
  out.delta = out.left_derivative = out.right_derivative = greeks.delta;
  if (greeks.degenerate) out.warnings.push_back("degenerate inputs: limit delta used");
  return out;
}

double InstrumentGreeks::get(Greek g) const {
  switch (g) {
    case Greek::delta:
      return delta;
    case Greek::kappa:
      return kappa;
    case Greek::gamma:
      return gamma;
  }
  return 0.0;
}

Greek greek_from_string(const std::string& name) {
  if (name == "delta" || name == "Delta") return Greek::delta;
  if (name == "kappa" || name == "Kappa" || name == "vega") return Greek::kappa;
  if (name == "gamma" || name == "Gamma") return Greek::gamma;
  throw ValidationError("unknown greek '" + name + "'");
}

std::string to_string(Greek g) {
  switch (g) {
    case Greek::delta:
      return "delta";
    case Greek::kappa:
      return "kappa";
    case Greek::gamma:
      return "gamma";
  }
  return "";
}

HedgeReport neutralize(const std::vector<InstrumentGreeks>& instruments,
                       const NeutralizeOptions& opts) {
  const auto n = static_cast<Eigen::Index>(instruments.size());
  if (n == 0) throw ValidationError("neutralize: no instruments");
  for (Greek g : opts.targets)
    if (g == Greek::delta)
      throw ValidationError("neutralize: delta is absorbed by the underlying; target kappa or gamma");
  const auto k = static_cast<Eigen::Index>(opts.targets.size());
  if (n < k + 1) {
    std::ostringstream msg;
    msg << "neutralize: " << k << " targeted greeks need at least " << k + 1 << " instruments, got "
        << n;
    throw ValidationError(msg.str());
  }
  for (const auto& g : instruments)
    if (!std::isfinite(g.delta) || !std::isfinite(g.kappa) || !std::isfinite(g.gamma))
      throw ValidationError("neutralize: non-finite greeks");

  Matrix a = Matrix::Zero(k + 1, n);
  Vector b = Vector::Zero(k + 1);
  for (Eigen::Index r = 0; r < k; ++r)
    for (Eigen::Index i = 0; i < n; ++i)
      a(r, i) = instruments[static_cast<std::size_t>(i)].get(opts.targets[static_cast<std::size_t>(r)]);
  if (opts.normalization == Normalization::first_weight) {
    a(k, 0) = 1.0;
  } else {
    if (static_cast<Eigen::Index>(opts.values.size()) != n)
      throw ValidationError("neutralize: unit-value normalization needs one value per instrument");
    for (Eigen::Index i = 0; i < n; ++i) a(k, i) = opts.values[static_cast<std::size_t>(i)];
  }
  b(k) = 1.0;

  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector sv = svd.singularValues();
  const double smax = sv(0), smin = sv(sv.size() - 1);
  HedgeReport out;
  out.condition_number = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(out.condition_number <= 1e12)) {
    std::ostringstream msg;
    msg << "neutralize: constraint system is singular (condition number " << out.condition_number
        << "); deficient combination of rows [";
    const Vector dir = svd.matrixU().col(sv.size() - 1);
    for (Eigen::Index r = 0; r <= k; ++r) {
      msg << (r ? ", " : "") << (r < k ? to_string(opts.targets[static_cast<std::size_t>(r)]) : "normalization")
          << ": " << dir(r);
    }
    msg << "]";
    throw ValidationError(msg.str());
  }
  out.alpha = svd.solve(b);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& g = instruments[static_cast<std::size_t>(i)];
    out.delta += out.alpha(i) * g.delta;
    out.residual.kappa += out.alpha(i) * g.kappa;
    out.residual.gamma += out.alpha(i) * g.gamma;
  }
  // the underlying position carries delta 1 and no kappa or gamma
  out.residual.delta = 0.0;
  return out;
}

nlohmann::json HedgeReport::to_json() const {
  return {{"weights", std::vector<double>(alpha.data(), alpha.data() + alpha.size())},
          {"delta", delta},
          {"residual_greeks",
           {{"delta", residual.delta}, {"kappa", residual.kappa}, {"gamma", residual.gamma}}},
          {"condition_number", condition_number}};
}

}  // namespace stochastica
