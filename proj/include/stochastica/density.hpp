#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "stochastica/core.hpp"
#include "stochastica/mc.hpp"
#include "stochastica/models.hpp"
#include "stochastica/pde.hpp"

namespace stochastica {

using DensityFn = std::function<double(double)>;

/// Density per unit price sampled on a strictly increasing grid.
class DensityGrid {
 public:
  DensityGrid() = default;
  /// Validates monotonicity and non-negativity; negatives within 1e-6 of the
  /// peak are clipped to zero.
  DensityGrid(Vector s, Vector p, double t);

  const Vector& s() const { return s_; }
  const Vector& p() const { return p_; }
  double t() const { return t_; }
  Eigen::Index size() const { return s_.size(); }

  double mass() const;
  double integrate(const DensityFn& f) const;
  double mean() const;
  double variance() const;
  double at(double s) const;  // linear interpolation, zero outside
  /// Throws NumericalError if |mass - 1| > eps.
  void check_normalized(double eps = 1e-3) const;

  /// Width of the Gaussian that replaced a point-mass start (0 if none).
  double regularization_width = 0.0;

 private:
  Vector s_;
  Vector p_;
  double t_ = 0.0;
};

/// Trapezoid L1 distance on a's grid.
double l1_distance(const DensityGrid& a, const DensityFn& b);
double l1_distance(const DensityGrid& a, const DensityGrid& b);

/// Closed-form density: Gaussian, lognormal, or a point mass for t <= 0.
class AnalyticDensity {
 public:
  enum class Shape { point_mass, gaussian, lognormal };

  static AnalyticDensity point_mass(double at);
  static AnalyticDensity gaussian(double mean, double variance);
  /// Law of S = exp(Y), Y ~ N(log_mean, log_variance).
  static AnalyticDensity lognormal(double log_mean, double log_variance);

  Shape shape() const { return shape_; }
  bool is_point_mass() const { return shape_ == Shape::point_mass; }

  /// Throws DomainError for a point mass.
  double pdf(double s) const;
  double cdf(double s) const;
  double mean() const;
  double variance() const;
  double median() const;
  DensityFn function() const;

  /// Samples the density on s. A point mass becomes a Gaussian two grid
  /// cells wide (standard deviation one cell), recorded in
  /// regularization_width and renormalized to unit trapezoid mass.
  DensityGrid on_grid(const Vector& s, double t) const;

  double location() const { return m_; }
  double spread() const { return v_; }

 private:
  AnalyticDensity(Shape shape, double m, double v) : shape_(shape), m_(m), v_(v) {}
  Shape shape_;
  double m_;
  double v_;
};

AnalyticDensity density_bm(double t, double s0, double mu, double sigma);
AnalyticDensity density_gbm(double t, double s0, double mu, double sigma);
AnalyticDensity density_vasicek(double t, double s0, double a, double b, double sigma);

/// Closed-form transition law of a bm/gbm/vasicek model from (t0, s0) to t.
AnalyticDensity analytic_transition(const ModelSpec& model, double t0, double s0, double t);

/// y = Y(x) strictly monotone, with inverse and derivative.
struct MonotoneMap {
  std::function<double(double)> forward;
  std::function<double(double)> inverse;
  std::function<double(double)> derivative;
};

/// p_y(y) = p_x(Y^{-1}(y)) / |Y'(Y^{-1}(y))|. Monotonicity is checked by
/// sampling the sign of Y' on [x_lo, x_hi].
DensityFn change_of_variable(DensityFn p_x, const MonotoneMap& y, double x_lo, double x_hi,
                             int samples = 1001);
/// Grid version: nodes mapped through Y (re-sorted if Y decreases).
DensityGrid change_of_variable(const DensityGrid& p_x, const MonotoneMap& y);

MonotoneMap log_map(double s_ref = 1.0);  // y = ln(s / s_ref)
MonotoneMap exp_map(double s_ref = 1.0);  // y = s_ref e^x

struct ForwardOptions {
  double theta = 0.5;
  bool rannacher = true;
  /// Keep every k-th step (the last step is always kept).
  std::size_t store_every = 1;
};

/// Crank-Nicolson march of the Fokker-Planck equation from `initial` (on a
/// uniform grid) across `grid`. Returns the density after each stored step.
/// Throws NumericalError if the total variation grows more than 10x.
std::vector<DensityGrid> fokker_planck_forward(const ModelSpec& model, const DensityGrid& initial,
                                               const TimeGrid& grid, const ForwardOptions& opts = {});

enum class Coordinates { automatic, price, log_price };

/// Resolution of the point-source solvers.
struct Resolution {
  Eigen::Index n_space = 801;
  std::size_t n_steps = 400;
  double width_sd = 8.0;
  Coordinates coordinates = Coordinates::automatic;
};

/// Coordinates actually used for a model (log-price for price processes).
Coordinates resolve_coordinates(const ModelSpec& model, double s0, Coordinates requested);

/// Working grid of +-width_sd instantaneous standard deviations around the
/// start and the drifted start, in the resolved coordinates.
pde::SpaceGrid default_space_grid(const ModelSpec& working_model, double x0, double t0, double t,
                                  const Resolution& res);

/// Transition density from a point mass at (t0, s0) to t by the forward
/// solver, returned in price coordinates.
DensityGrid forward_density(const ModelSpec& model, double s0, double t0, double t,
                            const Resolution& res = {});
/// Same on an explicit working grid (log-price nodes when coords is log_price).
DensityGrid forward_density(const ModelSpec& model, double s0, double t0, double t,
                            const pde::SpaceGrid& working, std::size_t n_steps, Coordinates coords);

struct BackwardSolution {
  Vector s;
  Vector u;
  double value_at(double s0) const;
};

/// u(t0, S0) = E[terminal(S_t) | S_t0 = S0] from the backward Kolmogorov
/// equation u_t0 = -mu u_S0 - sigma^2 u_S0S0 / 2 on a uniform price grid.
BackwardSolution kolmogorov_backward(const ModelSpec& model, const DensityFn& terminal,
                                     const pde::SpaceGrid& space, double t0, double t,
                                     const pde::TimeStepping& stepping = {});

/// P(source_i -> target_j), density per unit target price.
struct TransitionMatrix {
  Vector source;
  Vector target;
  Matrix values;
  double t0 = 0.0;
  double t = 0.0;
};

struct TransitionDensity {
  double t0 = 0.0;
  double s0 = 0.0;
  DensityGrid target;
};

TransitionMatrix analytic_transition_matrix(const ModelSpec& model, double t0, double t,
                                            const Vector& source, const Vector& target);

/// Transition matrix on the nodes of a working grid by the forward solver,
/// one regularized point source per node. Returned in price coordinates.
TransitionMatrix forward_transition_matrix(const ModelSpec& model, const pde::SpaceGrid& working,
                                           Coordinates coords, double t0, double t,
                                           std::size_t n_steps);

/// P_ac(S0, S) = integral dS'' P_ab(S0, S'') P_bc(S'', S), trapezoid on the
/// shared intermediate grid.
TransitionDensity compose_transition(const TransitionDensity& ab, const TransitionMatrix& bc);

}  // namespace stochastica
