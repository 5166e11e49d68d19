#include "stochastica/pde.hpp"

#include <cmath>
#include <sstream>

#include "stochastica/errors.hpp"
#include "stochastica/numerics.hpp"

namespace stochastica::pde {

SpaceGrid::SpaceGrid(double lo_, double hi_, Eigen::Index n_) : lo(lo_), hi(hi_), n(n_) {
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw DomainError("space grid: need finite lo < hi");
  if (n < 5) throw DomainError("space grid: need at least 5 nodes");
}

namespace {

// Operator M with u_tau = M u: three diagonals plus the extra entries the
// one-sided edge stencils put on u(2) in row 0 and u(n-3) in row n-1.
struct EdgeTridiagonal {
  Vector lower, diag, upper;
  double first_extra = 0.0;
  double last_extra = 0.0;

  Vector apply(const Vector& u) const {
    const Eigen::Index n = u.size();
    Vector out(n);
    out(0) = diag(0) * u(0) + upper(0) * u(1) + first_extra * u(2);
    for (Eigen::Index i = 1; i + 1 < n; ++i)
      out(i) = lower(i) * u(i - 1) + diag(i) * u(i) + upper(i) * u(i + 1);
    out(n - 1) = last_extra * u(n - 3) + lower(n - 1) * u(n - 2) + diag(n - 1) * u(n - 1);
    return out;
  }
};

EdgeTridiagonal assemble(const BackwardProblem& p, const Vector& x, double h, double t) {
  const Eigen::Index n = x.size();
  EdgeTridiagonal m{Vector::Zero(n), Vector::Zero(n), Vector::Zero(n)};
  const double c = p.reaction ? p.reaction(t) : 0.0;
  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    const double a = p.advection(t, x(i));
    const double b = p.diffusion(t, x(i));
    m.lower(i) = -a / (2.0 * h) + b / (h * h);
    m.upper(i) = a / (2.0 * h) + b / (h * h);
    m.diag(i) = -2.0 * b / (h * h) - c;
  }
  const double k = p.edge_curvature_ratio;
  const double g0 = p.advection(t, x(0)) + k * p.diffusion(t, x(0));
  m.diag(0) = -3.0 * g0 / (2.0 * h) - c;
  m.upper(0) = 4.0 * g0 / (2.0 * h);
  m.first_extra = -g0 / (2.0 * h);
  const double gn = p.advection(t, x(n - 1)) + k * p.diffusion(t, x(n - 1));
  m.diag(n - 1) = 3.0 * gn / (2.0 * h) - c;
  m.lower(n - 1) = -4.0 * gn / (2.0 * h);
  m.last_extra = gn / (2.0 * h);
  return m;
}

void check_finite(const Vector& u, double t) {
  if (!u.allFinite()) {
    std::ostringstream msg;
    msg << "backward solver: non-finite value at t=" << t;
    throw NumericalError(msg.str());
  }
}

Vector source_at(const BackwardProblem& p, const Vector& x, double t) {
  Vector q(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) q(i) = p.source(t, x(i));
  return q;
}

// (I - w dt M_new) u_new = (I + (1 - w) dt M_old) u_old + dt [(1 - w) q_old + w q_new]
Vector theta_step(const EdgeTridiagonal& m_old, const EdgeTridiagonal& m_new, const Vector& u,
                  double dt, double w, const Vector* q_old = nullptr,
                  const Vector* q_new = nullptr) {
  const Eigen::Index n = u.size();
  Vector rhs = u;
  if (w < 1.0) rhs += (1.0 - w) * dt * m_old.apply(u);
  if (q_old && w < 1.0) rhs += (1.0 - w) * dt * *q_old;
  if (q_new) rhs += w * dt * *q_new;
  Vector lower = -w * dt * m_new.lower;
  Vector diag = Vector::Ones(n) - w * dt * m_new.diag;
  Vector upper = -w * dt * m_new.upper;
  double e0 = -w * dt * m_new.first_extra;
  double en = -w * dt * m_new.last_extra;
  if (e0 != 0.0) {
    if (upper(1) == 0.0) throw NumericalError("backward solver: singular edge row");
    const double f = e0 / upper(1);
    diag(0) -= f * lower(1);
    upper(0) -= f * diag(1);
    rhs(0) -= f * rhs(1);
  }
  if (en != 0.0) {
    if (lower(n - 2) == 0.0) throw NumericalError("backward solver: singular edge row");
    const double f = en / lower(n - 2);
    lower(n - 1) -= f * diag(n - 2);
    diag(n - 1) -= f * upper(n - 2);
    rhs(n - 1) -= f * rhs(n - 2);
  }
  return numerics::solve_tridiagonal<double>(lower, diag, upper, rhs);
}

}  // namespace

Vector solve_backward(const BackwardProblem& problem, const SpaceGrid& grid, Vector u,
                      double t_start, double t_end, const TimeStepping& stepping) {
  if (!(t_end >= t_start)) throw DomainError("backward solver: need t_end >= t_start");
  if (u.size() != grid.n) throw ValidationError("backward solver: terminal size mismatch");
  if (stepping.n_steps == 0) throw DomainError("backward solver: n_steps must be positive");
  if (t_end == t_start) return u;
  const Vector x = grid.nodes();
  const double h = grid.step();
  const double dt = (t_end - t_start) / static_cast<double>(stepping.n_steps);
  auto time_at = [&](std::size_t k) { return t_end - static_cast<double>(k) * dt; };

  const bool has_source = static_cast<bool>(problem.source);
  EdgeTridiagonal m_prev = assemble(problem, x, h, t_end);
  Vector q_prev = has_source ? source_at(problem, x, t_end) : Vector();
  for (std::size_t k = 0; k < stepping.n_steps; ++k) {
    const double t_new = time_at(k + 1);
    Vector q_new = has_source ? source_at(problem, x, t_new) : Vector();
    if (k == 0 && stepping.rannacher) {
      const double t_mid = t_end - 0.5 * dt;
      const EdgeTridiagonal m_mid =
          problem.time_homogeneous ? m_prev : assemble(problem, x, h, t_mid);
      const Vector q_mid = has_source ? source_at(problem, x, t_mid) : Vector();
      u = theta_step(m_mid, m_mid, u, 0.5 * dt, 1.0, nullptr, has_source ? &q_mid : nullptr);
      const EdgeTridiagonal m_new =
          problem.time_homogeneous ? m_prev : assemble(problem, x, h, t_new);
      u = theta_step(m_new, m_new, u, 0.5 * dt, 1.0, nullptr, has_source ? &q_new : nullptr);
      m_prev = m_new;
    } else {
      const EdgeTridiagonal m_new =
          problem.time_homogeneous ? m_prev : assemble(problem, x, h, t_new);
      u = theta_step(m_prev, m_new, u, dt, stepping.theta, has_source ? &q_prev : nullptr,
                     has_source ? &q_new : nullptr);
      m_prev = m_new;
    }
    q_prev = std::move(q_new);
    check_finite(u, t_new);
  }
  return u;
}

double chang_cooper_weight(double w) {
  if (std::abs(w) < 1e-4) return 0.5 + w / 12.0;
  if (w > 700.0) return 1.0 - 1.0 / w;
  if (w < -700.0) return -1.0 / w;
  return 1.0 / (-std::expm1(-w)) - 1.0 / w;
}

void forward_operator(const std::function<double(double)>& drift,
                      const std::function<double(double)>& variance, const Vector& x,
                      Vector& lower, Vector& diag, Vector& upper) {
  const Eigen::Index n = x.size();
  const double h = x(1) - x(0);
  lower = Vector::Zero(n);
  diag = Vector::Zero(n);
  upper = Vector::Zero(n);
  Vector d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = variance(x(i));
  for (Eigen::Index k = 0; k + 1 < n; ++k) {
    // J = B [delta p_k + (1 - delta) p_{k+1}] - A (p_{k+1} - p_k) / h
    const double a = 0.25 * (d(k) + d(k + 1));
    const double b = drift(0.5 * (x(k) + x(k + 1))) - (d(k + 1) - d(k)) / (2.0 * h);
    double delta;
    if (a > 0.0) {
      delta = chang_cooper_weight(b * h / a);
    } else {
      delta = b > 0.0 ? 1.0 : 0.0;
    }
    const double alpha = b * delta + a / h;
    const double beta = b * (1.0 - delta) - a / h;
    diag(k) -= alpha / h;
    upper(k) -= beta / h;
    lower(k + 1) += alpha / h;
    diag(k + 1) += beta / h;
  }
}

}  // namespace stochastica::pde
