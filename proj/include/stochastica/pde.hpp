#pragma once

#include <cstddef>
#include <functional>

#include "stochastica/core.hpp"

namespace stochastica::pde {

/// Uniform 1-D grid with n nodes on [lo, hi].
struct SpaceGrid {
  double lo = 0.0;
  double hi = 1.0;
  Eigen::Index n = 2;

  SpaceGrid() = default;
  SpaceGrid(double lo_, double hi_, Eigen::Index n_);
  double step() const { return (hi - lo) / static_cast<double>(n - 1); }
  Vector nodes() const { return Vector::LinSpaced(n, lo, hi); }
};

/// Backward parabolic problem in tau = T - t:
///   u_tau = a(t,x) u_x + b(t,x) u_xx - c(t) u + q(t,x)
/// Central differences inside. At both edges the curvature is extrapolated
/// as u_xx = edge_curvature_ratio * u_x and u_x uses one-sided second-order
/// stencils.
struct BackwardProblem {
  std::function<double(double t, double x)> advection;
  std::function<double(double t, double x)> diffusion;
  std::function<double(double t)> reaction;
  std::function<double(double t, double x)> source;
  double edge_curvature_ratio = 0.0;
  bool time_homogeneous = false;
};

struct TimeStepping {
  std::size_t n_steps = 200;
  double theta = 0.5;
  /// First step replaced by two implicit-Euler half steps.
  bool rannacher = true;
};

/// Marches terminal values at time t_end back to t_start.
Vector solve_backward(const BackwardProblem& problem, const SpaceGrid& grid, Vector terminal,
                      double t_start, double t_end, const TimeStepping& stepping);

/// Flux-form forward operator for p_t = -(mu p)_x + (sigma^2 p)_xx / 2 with
/// zero flux through both edges; Chang-Cooper weighted drift flux.
/// Fills the three diagonals of L so that dp/dt = L p.
void forward_operator(const std::function<double(double)>& drift,
                      const std::function<double(double)>& variance, const Vector& x,
                      Vector& lower, Vector& diag, Vector& upper);

/// Chang-Cooper weight delta(w) = 1/(1 - e^{-w}) - 1/w, w = B h / A.
double chang_cooper_weight(double w);

}  // namespace stochastica::pde
