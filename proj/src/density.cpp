#include "stochastica/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "stochastica/errors.hpp"
#include "stochastica/numerics.hpp"

namespace stochastica {

DensityGrid::DensityGrid(Vector s, Vector p, double t) : s_(std::move(s)), p_(std::move(p)), t_(t) {
  if (s_.size() < 2 || s_.size() != p_.size())
    throw ValidationError("density grid: need matching s and p with at least 2 nodes");
  if (!s_.allFinite() || !p_.allFinite()) throw ValidationError("density grid: non-finite values");
  for (Eigen::Index i = 0; i + 1 < s_.size(); ++i)
    if (!(s_(i + 1) > s_(i))) throw ValidationError("density grid: s must be strictly increasing");
  const double peak = p_.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < p_.size(); ++i) {
    if (p_(i) >= 0.0) continue;
    if (p_(i) < -1e-6 * peak) {
      std::ostringstream msg;
      msg << "density grid: negative density " << p_(i) << " at s=" << s_(i);
      throw NumericalError(msg.str());
    }
    p_(i) = 0.0;
  }
}

double DensityGrid::mass() const { return numerics::trapezoid(s_, p_); }

double DensityGrid::integrate(const DensityFn& f) const {
  Vector y(s_.size());
  for (Eigen::Index i = 0; i < s_.size(); ++i) y(i) = f(s_(i)) * p_(i);
  return numerics::trapezoid(s_, y);
}

double DensityGrid::mean() const {
  return numerics::trapezoid(s_, Vector(s_.cwiseProduct(p_))) / mass();
}

double DensityGrid::variance() const {
  const double m = mean();
  const Vector d = (s_.array() - m).square().matrix().cwiseProduct(p_);
  return numerics::trapezoid(s_, d) / mass();
}

double DensityGrid::at(double s) const {
  if (s < s_(0) || s > s_(s_.size() - 1)) return 0.0;
  return numerics::interp_linear(s_, p_, s);
}

void DensityGrid::check_normalized(double eps) const {
  const double m = mass();
  if (std::abs(m - 1.0) > eps) {
    std::ostringstream msg;
    msg << "density grid: mass " << m << " at t=" << t_ << " (grid too narrow?)";
    throw NumericalError(msg.str());
  }
}

double l1_distance(const DensityGrid& a, const DensityFn& b) {
  Vector d(a.size());
  for (Eigen::Index i = 0; i < a.size(); ++i) d(i) = std::abs(a.p()(i) - b(a.s()(i)));
  return numerics::trapezoid(a.s(), d);
}

double l1_distance(const DensityGrid& a, const DensityGrid& b) {
  return l1_distance(a, [&b](double s) { return b.at(s); });
}

AnalyticDensity AnalyticDensity::point_mass(double at) {
  if (!std::isfinite(at)) throw DomainError("point mass: location must be finite");
  return AnalyticDensity(Shape::point_mass, at, 0.0);
}

AnalyticDensity AnalyticDensity::gaussian(double mean, double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance) || !std::isfinite(mean))
    throw DomainError("gaussian density: need finite mean and variance > 0");
  return AnalyticDensity(Shape::gaussian, mean, variance);
}

AnalyticDensity AnalyticDensity::lognormal(double log_mean, double log_variance) {
  if (!(log_variance > 0.0) || !std::isfinite(log_variance) || !std::isfinite(log_mean))
    throw DomainError("lognormal density: need finite parameters and variance > 0");
  return AnalyticDensity(Shape::lognormal, log_mean, log_variance);
}

double AnalyticDensity::pdf(double s) const {
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  switch (shape_) {
    case Shape::point_mass:
      throw DomainError("point mass has no density");
    case Shape::gaussian: {
      const double z = (s - m_) / std::sqrt(v_);
      return kInvSqrt2Pi * std::exp(-0.5 * z * z) / std::sqrt(v_);
    }
    case Shape::lognormal: {
      if (s <= 0.0) return 0.0;
      const double z = (std::log(s) - m_) / std::sqrt(v_);
      return kInvSqrt2Pi * std::exp(-0.5 * z * z) / (s * std::sqrt(v_));
    }
  }
  return 0.0;
}

double AnalyticDensity::cdf(double s) const {
  switch (shape_) {
    case Shape::point_mass:
      return s >= m_ ? 1.0 : 0.0;
    case Shape::gaussian:
      return 0.5 * std::erfc(-(s - m_) / std::sqrt(2.0 * v_));
    case Shape::lognormal:
      if (s <= 0.0) return 0.0;
      return 0.5 * std::erfc(-(std::log(s) - m_) / std::sqrt(2.0 * v_));
  }
  return 0.0;
}

double AnalyticDensity::mean() const {
  return shape_ == Shape::lognormal ? std::exp(m_ + 0.5 * v_) : m_;
}

double AnalyticDensity::variance() const {
  switch (shape_) {
    case Shape::point_mass:
      return 0.0;
    case Shape::gaussian:
      return v_;
    case Shape::lognormal:
      return std::expm1(v_) * std::exp(2.0 * m_ + v_);
  }
  return 0.0;
}

double AnalyticDensity::median() const { return shape_ == Shape::lognormal ? std::exp(m_) : m_; }

DensityFn AnalyticDensity::function() const {
  const AnalyticDensity copy = *this;
  return [copy](double s) { return copy.pdf(s); };
}

DensityGrid AnalyticDensity::on_grid(const Vector& s, double t) const {
  if (s.size() < 2) throw ValidationError("density grid: need at least 2 nodes");
  if (!is_point_mass()) {
    Vector p(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) p(i) = pdf(s(i));
    return DensityGrid(s, p, t);
  }
  const double h = (s(s.size() - 1) - s(0)) / static_cast<double>(s.size() - 1);
  if (m_ < s(0) || m_ > s(s.size() - 1))
    throw DomainError("point mass lies outside the grid");
  Vector p(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double z = (s(i) - m_) / h;
    p(i) = std::exp(-0.5 * z * z);
  }
  p /= numerics::trapezoid(s, p);
  DensityGrid out(s, p, t);
  out.regularization_width = h;
  return out;
}

AnalyticDensity density_bm(double t, double s0, double mu, double sigma) {
  if (sigma < 0.0) throw DomainError("density_bm: sigma must be >= 0");
  if (t <= 0.0) return AnalyticDensity::point_mass(s0);
  if (sigma == 0.0) return AnalyticDensity::point_mass(s0 + mu * t);
  return AnalyticDensity::gaussian(s0 + mu * t, sigma * sigma * t);
}

AnalyticDensity density_gbm(double t, double s0, double mu, double sigma) {
  if (!(s0 > 0.0)) throw DomainError("density_gbm: S0 must be > 0");
  if (sigma < 0.0) throw DomainError("density_gbm: sigma must be >= 0");
  if (t <= 0.0) return AnalyticDensity::point_mass(s0);
  if (sigma == 0.0) return AnalyticDensity::point_mass(s0 * std::exp(mu * t));
  return AnalyticDensity::lognormal(std::log(s0) + (mu - 0.5 * sigma * sigma) * t,
                                    sigma * sigma * t);
}

AnalyticDensity density_vasicek(double t, double s0, double a, double b, double sigma) {
  if (!(a > 0.0)) throw DomainError("density_vasicek: a must be > 0");
  if (sigma < 0.0) throw DomainError("density_vasicek: sigma must be >= 0");
  if (t <= 0.0) return AnalyticDensity::point_mass(s0);
  const double decay = std::exp(-a * t);
  const double mean = s0 * decay + b * (1.0 - decay);
  if (sigma == 0.0) return AnalyticDensity::point_mass(mean);
  return AnalyticDensity::gaussian(mean, sigma * sigma * -std::expm1(-2.0 * a * t) / (2.0 * a));
}

AnalyticDensity analytic_transition(const ModelSpec& model, double t0, double s0, double t) {
  const auto cf = closed_form_params(model);
  if (!cf) throw ValidationError("analytic transition: model has no closed form");
  const double tau = t - t0;
  switch (cf->kind) {
    case ModelKind::bm:
      return density_bm(tau, s0, cf->mu, cf->sigma);
    case ModelKind::gbm:
      return density_gbm(tau, s0, cf->mu, cf->sigma);
    case ModelKind::vasicek:
      return density_vasicek(tau, s0, cf->a, cf->b, cf->sigma);
    default:
      throw ValidationError("analytic transition: model has no closed form");
  }
}

DensityFn change_of_variable(DensityFn p_x, const MonotoneMap& y, double x_lo, double x_hi,
                             int samples) {
  if (!(x_hi > x_lo) || samples < 2) throw DomainError("change of variable: bad support");
  int sign = 0;
  for (int k = 0; k < samples; ++k) {
    const double x = x_lo + (x_hi - x_lo) * k / (samples - 1);
    const double d = y.derivative(x);
    const int s = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (s == 0 || (sign != 0 && s != sign)) {
      std::ostringstream msg;
      msg << "change of variable: map is not strictly monotone near x=" << x;
      throw DomainError(msg.str());
    }
    sign = s;
  }
  return [p_x = std::move(p_x), y](double v) {
    const double x = y.inverse(v);
    return p_x(x) / std::abs(y.derivative(x));
  };
}

DensityGrid change_of_variable(const DensityGrid& p_x, const MonotoneMap& y) {
  const Eigen::Index n = p_x.size();
  Vector s(n), p(n);
  int sign = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = p_x.s()(i);
    const double d = y.derivative(x);
    const int sg = d > 0.0 ? 1 : (d < 0.0 ? -1 : 0);
    if (sg == 0 || (sign != 0 && sg != sign)) {
      std::ostringstream msg;
      msg << "change of variable: map is not strictly monotone near x=" << x;
      throw DomainError(msg.str());
    }
    sign = sg;
    s(i) = y.forward(x);
    p(i) = p_x.p()(i) / std::abs(d);
  }
  if (sign < 0) {
    s.reverseInPlace();
    p.reverseInPlace();
  }
  DensityGrid out(s, p, p_x.t());
  out.regularization_width = p_x.regularization_width;
  return out;
}

MonotoneMap log_map(double s_ref) {
  return {[s_ref](double s) { return std::log(s / s_ref); },
          [s_ref](double y) { return s_ref * std::exp(y); }, [](double s) { return 1.0 / s; }};
}

MonotoneMap exp_map(double s_ref) {
  return {[s_ref](double x) { return s_ref * std::exp(x); },
          [s_ref](double y) { return std::log(y / s_ref); },
          [s_ref](double x) { return s_ref * std::exp(x); }};
}

namespace {

double total_variation(const Vector& p) {
  return (p.tail(p.size() - 1) - p.head(p.size() - 1)).cwiseAbs().sum();
}

void require_uniform(const Vector& x) {
  const double h = (x(x.size() - 1) - x(0)) / static_cast<double>(x.size() - 1);
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    if (std::abs(x(i + 1) - x(i) - h) > 1e-9 * std::max(h, std::abs(x(i)))) {
      throw ValidationError("forward solver: initial grid must be uniform");
    }
  }
}

// Tridiagonal system factored once and applied to many right-hand sides.
class FactoredTridiagonal {
 public:
  FactoredTridiagonal(const Vector& lower, const Vector& diag, const Vector& upper)
      : lower_(lower), c_(diag.size()), inv_(diag.size()) {
    const Eigen::Index n = diag.size();
    double denom = diag(0);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i > 0) denom = diag(i) - lower(i) * c_(i - 1);
      if (denom == 0.0) throw NumericalError("forward solver: zero pivot");
      inv_(i) = 1.0 / denom;
      c_(i) = i + 1 < n ? upper(i) * inv_(i) : 0.0;
    }
  }

  template <typename Derived>
  void solve_in_place(Eigen::MatrixBase<Derived>& x) const {
    const Eigen::Index n = c_.size();
    x.row(0) *= inv_(0);
    for (Eigen::Index i = 1; i < n; ++i) x.row(i) = (x.row(i) - lower_(i) * x.row(i - 1)) * inv_(i);
    for (Eigen::Index i = n - 2; i >= 0; --i) x.row(i) -= c_(i) * x.row(i + 1);
  }

 private:
  Vector lower_, c_, inv_;
};

struct Operator {
  Vector lower, diag, upper;

  template <typename Derived>
  Matrix apply(const Eigen::MatrixBase<Derived>& p) const {
    const Eigen::Index n = diag.size();
    Matrix out(p.rows(), p.cols());
    for (Eigen::Index i = 0; i < n; ++i) {
      out.row(i) = diag(i) * p.row(i);
      if (i > 0) out.row(i) += lower(i) * p.row(i - 1);
      if (i + 1 < n) out.row(i) += upper(i) * p.row(i + 1);
    }
    return out;
  }
};

class ForwardStepper {
 public:
  ForwardStepper(const ModelSpec& model, Vector x, const ForwardOptions& opts)
      : model_(model), x_(std::move(x)), opts_(opts) {
    if (!model.is_scalar()) throw DomainError("forward solver: model must be one-dimensional");
  }

  Operator at(double t) const {
    if (model_.time_homogeneous() && cached_) return *cached_;
    Operator op;
    pde::forward_operator([&](double s) { return model_.drift(t, s); },
                          [&](double s) {
                            const double v = model_.vol(t, s);
                            return v * v;
                          },
                          x_, op.lower, op.diag, op.upper);
    if (!op.diag.allFinite() || !op.lower.allFinite() || !op.upper.allFinite()) {
      std::ostringstream msg;
      msg << "forward solver: non-finite drift or vol at t=" << t;
      throw NumericalError(msg.str());
    }
    if (model_.time_homogeneous()) cached_ = op;
    return op;
  }

  // One step of size dt from t to t + dt on every column of p.
  void step(Matrix& p, double t, double dt, bool first) const {
    if (first && opts_.rannacher) {
      implicit(p, at(t + 0.5 * dt), 0.5 * dt);
      implicit(p, at(t + dt), 0.5 * dt);
      return;
    }
    const double w = opts_.theta;
    const Operator old_op = at(t);
    const Operator new_op = at(t + dt);
    Matrix rhs = p;
    if (w < 1.0) rhs += (1.0 - w) * dt * old_op.apply(p);
    solve(new_op, w * dt, rhs);
    p = std::move(rhs);
  }

 private:
  void implicit(Matrix& p, const Operator& op, double dt) const { solve(op, dt, p); }

  static void solve(const Operator& op, double wdt, Matrix& rhs) {
    const Eigen::Index n = op.diag.size();
    const FactoredTridiagonal f(-wdt * op.lower, Vector::Ones(n) - wdt * op.diag,
                                -wdt * op.upper);
    f.solve_in_place(rhs);
  }

  const ModelSpec& model_;
  Vector x_;
  ForwardOptions opts_;
  mutable std::optional<Operator> cached_;
};

}  // namespace

std::vector<DensityGrid> fokker_planck_forward(const ModelSpec& model, const DensityGrid& initial,
                                               const TimeGrid& grid, const ForwardOptions& opts) {
  require_uniform(initial.s());
  if (std::abs(initial.t() - grid.t0) > 1e-12 * std::max(1.0, std::abs(grid.t0)))
    throw ValidationError("forward solver: initial density time differs from grid start");
  if (opts.store_every == 0) throw DomainError("forward solver: store_every must be positive");
  ForwardStepper stepper(model, initial.s(), opts);
  Matrix p = initial.p();
  const double tv0 = total_variation(initial.p());
  std::vector<DensityGrid> out;
  for (std::size_t m = 0; m < grid.n_steps; ++m) {
    stepper.step(p, grid.time(m), grid.dt, m == 0);
    if (!p.allFinite()) {
      std::ostringstream msg;
      msg << "forward solver: non-finite density at t=" << grid.time(m + 1);
      throw NumericalError(msg.str());
    }
    const double tv = total_variation(p.col(0));
    if (tv > 10.0 * tv0) {
      std::ostringstream msg;
      msg << "forward solver: total variation grew " << tv / tv0 << "x by t=" << grid.time(m + 1)
          << "; retry with dt <= " << grid.dt / 4.0;
      throw NumericalError(msg.str());
    }
    if ((m + 1) % opts.store_every == 0 || m + 1 == grid.n_steps) {
      DensityGrid g(initial.s(), p.col(0), grid.time(m + 1));
      g.regularization_width = initial.regularization_width;
      out.push_back(std::move(g));
    }
  }
  return out;
}

Coordinates resolve_coordinates(const ModelSpec& model, double s0, Coordinates requested) {
  if (requested == Coordinates::log_price && !(s0 > 0.0))
    throw DomainError("log-price coordinates need S0 > 0");
  if (requested != Coordinates::automatic) return requested;
  return model.price_process() && s0 > 0.0 ? Coordinates::log_price : Coordinates::price;
}

pde::SpaceGrid default_space_grid(const ModelSpec& working_model, double x0, double t0, double t,
                                  const Resolution& res) {
  const double tau = t - t0;
  if (!(tau > 0.0)) throw DomainError("density solver: need t > t0");
  const double sd = std::abs(working_model.vol(t0, x0)) * std::sqrt(tau);
  const double shift = working_model.drift(t0, x0) * tau;
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(shift))
    throw DomainError("density solver: degenerate volatility at the start point");
  const double lo = std::min(x0, x0 + shift) - res.width_sd * sd;
  const double hi = std::max(x0, x0 + shift) + res.width_sd * sd;
  return pde::SpaceGrid(lo, hi, res.n_space);
}

DensityGrid forward_density(const ModelSpec& model, double s0, double t0, double t,
                            const pde::SpaceGrid& working, std::size_t n_steps,
                            Coordinates coords) {
  coords = resolve_coordinates(model, s0, coords);
  const bool log = coords == Coordinates::log_price;
  const ModelSpec work = log ? log_price_model(model) : model;
  const double x0 = log ? std::log(s0) : s0;
  const DensityGrid initial = AnalyticDensity::point_mass(x0).on_grid(working.nodes(), t0);
  ForwardOptions opts;
  opts.store_every = n_steps;
  auto result = fokker_planck_forward(work, initial, TimeGrid::over(t0, t, n_steps), opts);
  DensityGrid out = std::move(result.back());
  if (log) out = change_of_variable(out, exp_map());
  return out;
}

DensityGrid forward_density(const ModelSpec& model, double s0, double t0, double t,
                            const Resolution& res) {
  const Coordinates coords = resolve_coordinates(model, s0, res.coordinates);
  const bool log = coords == Coordinates::log_price;
  const ModelSpec work = log ? log_price_model(model) : model;
  const double x0 = log ? std::log(s0) : s0;
  return forward_density(model, s0, t0, t, default_space_grid(work, x0, t0, t, res), res.n_steps,
                         coords);
}

TransitionMatrix forward_transition_matrix(const ModelSpec& model, const pde::SpaceGrid& working,
                                           Coordinates coords, double t0, double t,
                                           std::size_t n_steps) {
  if (coords == Coordinates::automatic)
    throw DomainError("forward transition matrix: coordinates must be explicit");
  if (!(t > t0)) throw DomainError("forward transition matrix: need t > t0");
  const bool log = coords == Coordinates::log_price;
  const ModelSpec work = log ? log_price_model(model) : model;
  const Vector x = working.nodes();
  const Eigen::Index n = x.size();
  const double h = working.step();
  // column j: regularized point source at node j
  Matrix p(n, n);
  const Vector w = numerics::trapezoid_weights(x);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = (x(i) - x(j)) / h;
      p(i, j) = std::exp(-0.5 * z * z);
    }
    p.col(j) /= w.dot(p.col(j));
  }
  ForwardStepper stepper(work, x, {});
  const TimeGrid grid = TimeGrid::over(t0, t, n_steps);
  for (std::size_t m = 0; m < n_steps; ++m) stepper.step(p, grid.time(m), grid.dt, m == 0);
  if (!p.allFinite()) throw NumericalError("forward transition matrix: non-finite density");

  TransitionMatrix out;
  out.t0 = t0;
  out.t = t;
  out.values = p.transpose();
  if (log) {
    out.source = x.array().exp().matrix();
    out.target = out.source;
    for (Eigen::Index j = 0; j < n; ++j) out.values.col(j) /= out.target(j);
  } else {
    out.source = x;
    out.target = x;
  }
  out.values = out.values.cwiseMax(0.0);
  return out;
}

double BackwardSolution::value_at(double s0) const { return numerics::interp_linear(s, u, s0); }

BackwardSolution kolmogorov_backward(const ModelSpec& model, const DensityFn& terminal,
                                     const pde::SpaceGrid& space, double t0, double t,
                                     const pde::TimeStepping& stepping) {
  if (!model.is_scalar()) throw DomainError("backward solver: model must be one-dimensional");
  pde::BackwardProblem problem;
  problem.advection = [&model](double tt, double s) { return model.drift(tt, s); };
  problem.diffusion = [&model](double tt, double s) {
    const double v = model.vol(tt, s);
    return 0.5 * v * v;
  };
  problem.time_homogeneous = model.time_homogeneous();
  BackwardSolution out;
  out.s = space.nodes();
  Vector u(out.s.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = terminal(out.s(i));
  out.u = pde::solve_backward(problem, space, std::move(u), t0, t, stepping);
  return out;
}

TransitionMatrix analytic_transition_matrix(const ModelSpec& model, double t0, double t,
                                            const Vector& source, const Vector& target) {
  TransitionMatrix out;
  out.source = source;
  out.target = target;
  out.t0 = t0;
  out.t = t;
  out.values.resize(source.size(), target.size());
  for (Eigen::Index i = 0; i < source.size(); ++i) {
    const AnalyticDensity d = analytic_transition(model, t0, source(i), t);
    if (d.is_point_mass()) throw DomainError("analytic transition matrix: degenerate transition");
    for (Eigen::Index j = 0; j < target.size(); ++j) out.values(i, j) = d.pdf(target(j));
  }
  return out;
}

TransitionDensity compose_transition(const TransitionDensity& ab, const TransitionMatrix& bc) {
  const Vector& mid = ab.target.s();
  if (mid.size() != bc.source.size())
    throw ValidationError("compose: intermediate grids differ in size");
  const double scale = std::max(1.0, mid.cwiseAbs().maxCoeff());
  if ((mid - bc.source).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ValidationError("compose: intermediate grids differ");
  if (std::abs(ab.target.t() - bc.t0) > 1e-12 * std::max(1.0, std::abs(bc.t0)))
    throw ValidationError("compose: intermediate times differ");
  const Vector w = numerics::trapezoid_weights(mid);
  const Vector p = bc.values.transpose() * w.cwiseProduct(ab.target.p());
  TransitionDensity out;
  out.t0 = ab.t0;
  out.s0 = ab.s0;
  out.target = DensityGrid(bc.target, p, bc.t);
  return out;
}

}  // namespace stochastica
