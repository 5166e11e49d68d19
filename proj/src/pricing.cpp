#include "stochastica/pricing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "stochastica/numerics.hpp"
#include "stochastica/pde.hpp"

namespace stochastica {

namespace {

void check_expiry(double expiry) {
  if (!(expiry > 0.0) || !std::isfinite(expiry)) throw DomainError("payoff: expiry must be > 0");
}

void check_strike(double strike) {
  if (!(strike > 0.0) || !std::isfinite(strike)) throw DomainError("payoff: strike must be > 0");
}

}  // namespace

PayoffSpec PayoffSpec::call(double strike, double expiry) {
  check_strike(strike);
  check_expiry(expiry);
  PayoffSpec p;
  p.kind = PayoffKind::call;
  p.strike = strike;
  p.expiry = expiry;
  p.terminal = [strike](double s) { return std::max(s - strike, 0.0); };
  p.breakpoints = {strike};
  p.description = {{"kind", "call"}, {"strike", strike}, {"expiry", expiry}};
  return p;
}

PayoffSpec PayoffSpec::put(double strike, double expiry) {
  check_strike(strike);
  check_expiry(expiry);
  PayoffSpec p;
  p.kind = PayoffKind::put;
  p.strike = strike;
  p.expiry = expiry;
  p.terminal = [strike](double s) { return std::max(strike - s, 0.0); };
  p.breakpoints = {strike};
  p.description = {{"kind", "put"}, {"strike", strike}, {"expiry", expiry}};
  return p;
}

PayoffSpec PayoffSpec::digital(double strike, double expiry, double amount) {
  check_strike(strike);
  check_expiry(expiry);
  PayoffSpec p;
  p.kind = PayoffKind::digital;
  p.strike = strike;
  p.expiry = expiry;
  p.amount = amount;
  p.terminal = [strike, amount](double s) { return s > strike ? amount : 0.0; };
  p.breakpoints = {strike};
  p.description = {{"kind", "digital"}, {"strike", strike}, {"expiry", expiry}, {"amount", amount}};
  return p;
}

PayoffSpec PayoffSpec::constant(double amount, double expiry) {
  check_expiry(expiry);
  PayoffSpec p;
  p.kind = PayoffKind::constant;
  p.expiry = expiry;
  p.amount = amount;
  p.terminal = [amount](double) { return amount; };
  p.description = {{"kind", "constant"}, {"amount", amount}, {"expiry", expiry}};
  return p;
}

PayoffSpec PayoffSpec::forward(double strike, double expiry) {
  check_expiry(expiry);
  PayoffSpec p;
  p.kind = PayoffKind::forward;
  p.strike = strike;
  p.expiry = expiry;
  p.terminal = [strike](double s) { return s - strike; };
  p.description = {{"kind", "forward"}, {"strike", strike}, {"expiry", expiry}};
  return p;
}

PayoffSpec PayoffSpec::table(std::vector<double> s, std::vector<double> v, double expiry) {
  check_expiry(expiry);
  if (s.size() < 2 || s.size() != v.size())
    throw ValidationError("payoff table: need matching s and v with at least 2 points");
  for (std::size_t i = 0; i + 1 < s.size(); ++i)
    if (!(s[i + 1] > s[i])) throw ValidationError("payoff table: s must be strictly increasing");
  PayoffSpec p;
  p.kind = PayoffKind::table;
  p.expiry = expiry;
  p.breakpoints = s;
  p.description = {{"kind", "table"}, {"s", s}, {"v", v}, {"expiry", expiry}};
  const Vector sx = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
  const Vector vx = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  p.terminal = [sx, vx](double at) { return numerics::interp_linear(sx, vx, at); };
  return p;
}

PayoffSpec PayoffSpec::custom(std::function<double(double)> terminal, double expiry,
                              std::vector<double> breakpoints) {
  check_expiry(expiry);
  PayoffSpec p;
  p.kind = PayoffKind::custom;
  p.expiry = expiry;
  p.terminal = std::move(terminal);
  p.breakpoints = std::move(breakpoints);
  p.description = {{"kind", "custom"}, {"expiry", expiry}};
  return p;
}

PayoffSpec& PayoffSpec::with_stream(std::function<double(double, double)> rate) {
  stream = std::move(rate);
  description["stream"] = true;
  return *this;
}

PayoffSpec combine(double a, const PayoffSpec& p1, double b, const PayoffSpec& p2) {
  if (p1.expiry != p2.expiry) throw ValidationError("combine: payoffs must share the expiry");
  std::vector<double> bp = p1.breakpoints;
  bp.insert(bp.end(), p2.breakpoints.begin(), p2.breakpoints.end());
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  PayoffSpec out = PayoffSpec::custom(
      [a, b, f1 = p1.terminal, f2 = p2.terminal](double s) { return a * f1(s) + b * f2(s); },
      p1.expiry, std::move(bp));
  if (p1.stream || p2.stream) {
    auto zero = [](double, double) { return 0.0; };
    std::function<double(double, double)> s1 = p1.stream ? p1.stream : zero;
    std::function<double(double, double)> s2 = p2.stream ? p2.stream : zero;
    out.with_stream([a, b, s1, s2](double t, double s) { return a * s1(t, s) + b * s2(t, s); });
  }
  out.description = {{"kind", "combination"},
                     {"terms", {{{"weight", a}, {"payoff", p1.description}},
                                {{"weight", b}, {"payoff", p2.description}}}}};
  return out;
}

PayoffSpec payoff_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ValidationError("payoff: missing 'kind'");
  if (!j.contains("expiry")) throw ValidationError("payoff: missing 'expiry'");
  const std::string kind = j.at("kind").get<std::string>();
  const double expiry = j.at("expiry").get<double>();
  auto strike = [&] {
    if (!j.contains("strike")) throw ValidationError("payoff: missing 'strike'");
    return j.at("strike").get<double>();
  };
  if (kind == "call") return PayoffSpec::call(strike(), expiry);
  if (kind == "put") return PayoffSpec::put(strike(), expiry);
  if (kind == "digital") return PayoffSpec::digital(strike(), expiry, j.value("amount", 1.0));
  if (kind == "constant") return PayoffSpec::constant(j.value("amount", 1.0), expiry);
  if (kind == "forward") return PayoffSpec::forward(strike(), expiry);
  if (kind == "table") {
    if (!j.contains("s") || !j.contains("v")) throw ValidationError("payoff table: missing 's' or 'v'");
    return PayoffSpec::table(j.at("s").get<std::vector<double>>(), j.at("v").get<std::vector<double>>(),
                             expiry);
  }
  throw ValidationError("payoff: unknown kind '" + kind + "'");
}

ModelSpec risk_neutralize(const ModelSpec& model, const DiscountCurve& curve,
                          std::optional<ModelSpec::ScalarMap> drift_override) {
  nlohmann::json config = model.config();
  config.erase("risk_neutral");
  config["risk_neutral"] = {{"curve", curve.to_json()}};
  // the original drift no longer influences the model
  if (model.price_process() && config.contains("params") && config["params"].is_object())
    config["params"].erase("mu");
  const bool homogeneous = model.time_homogeneous() && curve.is_flat();

  if (model.is_scalar()) {
    ModelSpec::ScalarMap drift;
    if (model.price_process()) {
      drift = [curve](double t, double s) { return curve.rate(t) * s; };
    } else if (drift_override) {
      drift = *drift_override;
      config["risk_neutral"]["drift"] = "override";
    } else {
      throw ValidationError(
          "risk_neutralize: model is not a price process; supply an explicit risk-neutral drift");
    }
    ModelSpec out(model.kind(), std::move(config), std::move(drift), model.scalar_vol());
    out.set_price_process(model.price_process()).set_time_homogeneous(homogeneous);
    return out;
  }
  if (!model.price_process())
    throw ValidationError(
        "risk_neutralize: multi-asset model is not a price process; no override is supported");
  ModelSpec out(
      model.kind(), std::move(config), model.dimension(), model.noise_dim(),
      [curve](double t, const Vector& s, Vector& out) { out = curve.rate(t) * s; },
      [model](double t, const Vector& s, Matrix& out) { model.vol_into(t, s, out); });
  out.set_price_process(true).set_time_homogeneous(homogeneous);
  return out;
}

bool is_risk_neutral(const ModelSpec& model) { return model.config().contains("risk_neutral"); }

void BSParams::validate() const {
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("bs: spot must be > 0");
  if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("bs: strike must be > 0");
  if (!std::isfinite(r)) throw DomainError("bs: rate must be finite");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("bs: sigma must be >= 0");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("bs: t must be >= 0");
}

double bs_price(const BSParams& p, OptionKind kind) {
  p.validate();
  return kind == OptionKind::call ? bs_call(p.s, p.k, p.r, p.sigma, p.t)
                                  : bs_put(p.s, p.k, p.r, p.sigma, p.t);
}

double moneyness(const BSParams& p) {
  p.validate();
  return std::log(p.s / p.k) + p.r * p.t;
}

double bs_call_moneyness(double m, double z) {
  if (z < 0.0) throw DomainError("bs: total volatility must be >= 0");
  if (z == 0.0) return std::max(std::expm1(m), 0.0);
  return std::exp(m) * norm_cdf(m / z + z / 2.0) - norm_cdf(m / z - z / 2.0);
}

GreeksReport bs_greeks(const BSParams& p, OptionKind kind) {
  p.validate();
  GreeksReport g;
  const double shift = kind == OptionKind::call ? 0.0 : -1.0;
  if (p.sigma == 0.0 || p.t == 0.0) {
    const double fwd = p.s - p.k * std::exp(-p.r * p.t);
    g.delta = (fwd > 0.0 ? 1.0 : (fwd < 0.0 ? 0.0 : 0.5)) + shift;
    g.delta_expanded = g.delta;
    g.degenerate = true;
    return g;
  }
  const double sqrt_t = std::sqrt(p.t);
  const double dp = bs_d_plus(p.s, p.k, p.r, p.sigma, p.t);
  const double dm = dp - p.sigma * sqrt_t;
  const double kdf = p.k * std::exp(-p.r * p.t);
  const double np = norm_pdf(dp);
  const double nm = norm_pdf(dm);
  g.identity_residual = p.s * np - kdf * nm;
  g.delta = norm_cdf(dp) + shift;
  g.delta_expanded = norm_cdf(dp) + (np - kdf / p.s * nm) / (p.sigma * sqrt_t) + shift;
  g.kappa = p.s * sqrt_t * np;
  const double a = (std::log(p.s / p.k) + p.r * p.t) / (p.sigma * p.sigma * sqrt_t);
  const double ddp = -a + sqrt_t / 2.0;
  const double ddm = -a - sqrt_t / 2.0;
  g.kappa_expanded = p.s * ddp * np - kdf * ddm * nm;
  g.gamma = np / (p.s * p.sigma * sqrt_t);
  return g;
}

MCPrice pv_mc(const ModelSpec& model, const DiscountCurve& curve, const PayoffSpec& payoff,
              double s0, double dt, std::size_t n_paths, std::uint64_t seed,
              SimulationOptions opts) {
  if (!model.is_scalar()) throw DomainError("pv_mc: model must be one-dimensional");
  const ModelSpec rn = is_risk_neutral(model) ? model : risk_neutralize(model, curve);
  const std::size_t n_steps = steps_for(0.0, payoff.expiry, dt);
  const TimeGrid grid = TimeGrid::over(0.0, payoff.expiry, n_steps);
  std::vector<double> discount(n_steps + 1);
  for (std::size_t m = 0; m <= n_steps; ++m) discount[m] = curve.discount(0.0, grid.time(m));
  const bool has_stream = static_cast<bool>(payoff.stream);
  auto f = [&](const PathView& path) {
    double v = discount[n_steps] * payoff.terminal(path.terminal());
    if (has_stream) {
      for (std::size_t m = 0; m < n_steps; ++m)
        v += payoff.stream(grid.time(m), path(m)) * discount[m] * grid.dt;
    }
    return v;
  };
  MCPrice out;
  out.estimate = stream_expectation(rn, Vector::Constant(1, s0), grid, n_paths, seed, f, opts);
  out.model_hash = rn.hash();
  out.n_steps = n_steps;
  return out;
}

double PdeSolution::at(double s_query) const { return numerics::interp_linear(s, f, s_query); }

namespace {

constexpr std::array<double, 4> kGaussNodes = {-0.8611363115940526, -0.3399810435848563,
                                               0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kGaussWeights = {0.3478548451374538, 0.6521451548625461,
                                                 0.6521451548625461, 0.3478548451374538};

template <typename F>
double gauss_legendre(const F& f, double a, double b) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  double s = 0.0;
  for (std::size_t q = 0; q < 4; ++q) s += kGaussWeights[q] * f(mid + half * kGaussNodes[q]);
  return half * s;
}

// Integral of f over [a, b], split at the breakpoints inside.
template <typename F>
double split_integral(const F& f, double a, double b, const std::vector<double>& breakpoints) {
  double total = 0.0, lo = a;
  for (double bp : breakpoints) {
    if (bp > lo && bp < b) {
      total += gauss_legendre(f, lo, bp);
      lo = bp;
    }
  }
  return total + gauss_legendre(f, lo, b);
}

}  // namespace

PdeSolution pv_pde(const PayoffSpec& payoff, const DiscountCurve& curve, const LocalVol& sigma,
                   double s0, const PdeGrid& grid) {
  if (!(s0 > 0.0)) throw DomainError("pv_pde: S0 must be > 0");
  if (!payoff.terminal) throw ValidationError("pv_pde: payoff has no terminal function");
  const double expiry = payoff.expiry;
  check_expiry(expiry);
  const double sd = sigma(0.0, s0) * std::sqrt(expiry);
  if (!(sd > 0.0) || !std::isfinite(sd)) throw DomainError("pv_pde: sigma must be > 0 at S0");
  const Eigen::Index n = grid.n_space % 2 == 1 ? grid.n_space : grid.n_space + 1;
  const double x0 = std::log(s0);
  const pde::SpaceGrid space(x0 - grid.width_sd * sd, x0 + grid.width_sd * sd, n);
  const Vector x = space.nodes();
  const double h = space.step();

  std::vector<double> log_breaks;
  for (double bp : payoff.breakpoints)
    if (bp > 0.0) log_breaks.push_back(std::log(bp));
  std::sort(log_breaks.begin(), log_breaks.end());
  Vector u(n);
  auto terminal_x = [&](double xx) { return payoff.terminal(std::exp(xx)); };
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = x(i) - 0.5 * h, b = x(i) + 0.5 * h;
    const bool kinked = std::any_of(log_breaks.begin(), log_breaks.end(),
                                    [&](double lb) { return lb > a && lb < b; });
    u(i) = kinked ? split_integral(terminal_x, a, b, log_breaks) / h : terminal_x(x(i));
  }
  if (!u.allFinite()) throw ValidationError("pv_pde: payoff is not finite on the grid");

  pde::BackwardProblem problem;
  problem.advection = [&](double t, double xx) {
    const double v = sigma(t, std::exp(xx));
    return curve.rate(t) - 0.5 * v * v;
  };
  problem.diffusion = [&](double t, double xx) {
    const double v = sigma(t, std::exp(xx));
    return 0.5 * v * v;
  };
  problem.reaction = [&](double t) { return curve.rate(t); };
  if (payoff.stream) {
    problem.source = [&](double t, double xx) { return payoff.stream(t, std::exp(xx)); };
  }
  problem.edge_curvature_ratio = 1.0;
  pde::TimeStepping stepping;
  stepping.n_steps = grid.n_steps;
  PdeSolution out;
  out.f = pde::solve_backward(problem, space, std::move(u), 0.0, expiry, stepping);
  out.s = x.array().exp().matrix();
  out.s0 = s0;
  out.value = out.f((n - 1) / 2);
  return out;
}

namespace {

// Cubic Lagrange interpolation of y through the four nodes around cell j.
double cubic_at(const Vector& s, const Eigen::Ref<const Vector>& y, Eigen::Index j, double at) {
  const Eigen::Index n = s.size();
  const Eigen::Index i0 = std::clamp<Eigen::Index>(j - 1, 0, n - 4);
  double v = 0.0;
  for (Eigen::Index a = i0; a < i0 + 4; ++a) {
    double w = 1.0;
    for (Eigen::Index b = i0; b < i0 + 4; ++b)
      if (b != a) w *= (at - s(b)) / (s(a) - s(b));
    v += w * y(a);
  }
  return v;
}

double integrate_slice(const Vector& s, const Eigen::Ref<const Vector>& g,
                       const std::function<double(double)>& payoff,
                       const std::vector<double>& breakpoints) {
  double total = 0.0;
  for (Eigen::Index j = 0; j + 1 < s.size(); ++j) {
    auto f = [&](double at) { return cubic_at(s, g, j, at) * payoff(at); };
    total += split_integral(f, s(j), s(j + 1), breakpoints);
  }
  return total;
}

}  // namespace

GreenPrice pv_green(const GreensFunction& green, const PayoffSpec& payoff) {
  if (!payoff.terminal) throw ValidationError("pv_green: payoff has no terminal function");
  const Eigen::Index last = green.times.size() - 1;
  if (std::abs(green.times(last) - green.t0 - payoff.expiry) > 1e-9 * std::max(1.0, payoff.expiry))
    throw ValidationError("pv_green: Green's function horizon differs from the payoff expiry");
  if (green.s.size() < 4) throw ValidationError("pv_green: lattice too small");
  std::vector<double> bps = payoff.breakpoints;
  std::sort(bps.begin(), bps.end());

  GreenPrice out;
  const Vector terminal = green.values.row(last).transpose();
  out.value = integrate_slice(green.s, terminal, payoff.terminal, bps);
  if (payoff.stream) {
    // trapezoid in time over t0 (point mass at S0, discount 1) and every slice
    std::vector<double> times{green.t0}, rates{payoff.stream(green.t0, green.s0)};
    for (Eigen::Index k = 0; k <= last; ++k) {
      const double tk = green.times(k);
      const Vector gk = green.values.row(k).transpose();
      times.push_back(tk);
      rates.push_back(integrate_slice(green.s, gk, [&](double s) { return payoff.stream(tk, s); }, bps));
    }
    for (std::size_t k = 0; k + 1 < times.size(); ++k)
      out.value += 0.5 * (times[k + 1] - times[k]) * (rates[k] + rates[k + 1]);
  }

  const Eigen::Index n = green.s.size();
  const double p_lo = std::abs(payoff.terminal(green.s(0)));
  const double p_hi = std::abs(payoff.terminal(green.s(n - 1)));
  const double edge_mass = terminal(0) * (green.s(1) - green.s(0)) +
                           terminal(n - 1) * (green.s(n - 1) - green.s(n - 2));
  out.leakage_bound = (green.leaked_mass + edge_mass) * std::max(p_lo, p_hi);
  const double scale = std::max(std::abs(out.value), 1e-300);
  if (out.leakage_bound > 1e-4 * scale) {
    std::ostringstream msg;
    msg << "payoff support may extend past the lattice: unseen value up to " << out.leakage_bound;
    out.warnings.push_back(msg.str());
  }
  return out;
}

}  // namespace stochastica
