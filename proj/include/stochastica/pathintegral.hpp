#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "stochastica/core.hpp"
#include "stochastica/density.hpp"
#include "stochastica/mc.hpp"
#include "stochastica/models.hpp"
#include "stochastica/portfolio.hpp"

namespace stochastica {

/// Euler transition law over one step of length dt starting at time t:
/// S' ~ N(S + mu(t,S) dt, sigma(t,S)^2 dt), coefficients frozen at the
/// departure point.
class ShortTimeKernel {
 public:
  ShortTimeKernel(const ModelSpec& model, double t, double dt);

  const ModelSpec& model() const { return *model_; }
  double t() const { return t_; }
  double dt() const { return dt_; }

  double center(double s_from) const { return s_from + model_->drift(t_, s_from) * dt_; }
  double width(double s_from) const { return std::abs(model_->vol(t_, s_from)) * std::sqrt(dt_); }
  /// sigma(t, S) == 0: the step is a deterministic shift.
  bool degenerate(double s_from) const { return width(s_from) == 0.0; }

  /// Transition density per unit price. DomainError when degenerate.
  double operator()(double s_from, double s_to) const;

  /// The same kernel starting m steps later.
  ShortTimeKernel shifted(std::size_t m) const;

 private:
  const ModelSpec* model_;
  double t_;
  double dt_;
};

ShortTimeKernel one_step_kernel(const ModelSpec& model, double t, double dt);

/// Diagnostics of a lattice propagation.
struct PropagationReport {
  /// Mass whose kernel rows reached past the grid edges, summed over steps.
  double leaked_mass = 0.0;
};

/// n_steps kernel applications to a density on a uniform grid. Each kernel
/// row is truncated at +-8 widths and normalized to unit mass on the grid.
/// Throws NumericalError when more than 1% of the mass leaks past the edges.
DensityGrid propagate(const ShortTimeKernel& kernel, const DensityGrid& initial,
                      std::size_t n_steps, PropagationReport* report = nullptr);

/// Starts from an exact point mass at s0 (the first step places the kernel
/// row of s0 directly on the nodes, so no regularization is needed).
DensityGrid propagate_from_point(const ShortTimeKernel& kernel, double s0, const Vector& nodes,
                                 std::size_t n_steps, PropagationReport* report = nullptr);

/// n-step lattice transition matrix on uniform nodes, density per unit
/// target price.
TransitionMatrix kernel_transition_matrix(const ShortTimeKernel& kernel, const Vector& nodes,
                                          std::size_t n_steps);

struct LatticeOptions {
  Eigen::Index n_space = 801;
  std::size_t n_steps = 1000;  // used where no dt is given
  double width_sd = 8.0;
  Coordinates coordinates = Coordinates::automatic;
};

/// Transition density from (t0, s0) to t on the default lattice, in price
/// coordinates (log-price lattice for price processes).
DensityGrid lattice_density(const ModelSpec& model, double s0, double t0, double t,
                            const LatticeOptions& opts = {},
                            PropagationReport* report = nullptr);

/// Discounted transition density G(t, S) = e^{-R(t0,t)} P(t0, S0; t, S)
/// stored after every lattice step.
struct GreensFunction {
  double t0 = 0.0;
  double s0 = 0.0;
  Vector times;   // t0 + k dt, k = 1..n_steps
  Vector s;       // price nodes (non-uniform on a log-price lattice)
  Matrix values;  // values(k, j) at times(k), s(j)
  /// Lattice quadrature in price: sum_j weights(j) values(k, j) is the
  /// discounted mass the lattice carries.
  Vector weights;
  Vector discount;
  double leaked_mass = 0.0;

  /// Discounted density at times(k) as a grid.
  DensityGrid slice(Eigen::Index k) const;
  DensityGrid terminal() const { return slice(times.size() - 1); }
  double total_mass(Eigen::Index k) const;
};

/// dt is shortened if needed so that (t - t0) / dt is a whole number of
/// steps. The model must already be risk-neutral.
GreensFunction greens_function(const ModelSpec& model, const DiscountCurve& curve, double t0,
                               double s0, double t, double dt, const LatticeOptions& opts = {});

/// Number of equal steps no longer than dt covering [t0, t].
std::size_t steps_for(double t0, double t, double dt);

/// Monte Carlo E f(S_T) with increments drawn from the short-time kernel on
/// an independent random stream.
MCEstimate pi_expectation(const ModelSpec& model, const std::function<double(double)>& f,
                          double t0, double s0, double horizon, double dt, std::size_t n_paths,
                          std::uint64_t seed, SimulationOptions opts = {});

}  // namespace stochastica
