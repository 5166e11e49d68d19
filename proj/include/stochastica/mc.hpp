#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "stochastica/core.hpp"
#include "stochastica/models.hpp"

namespace stochastica {

/// Times t0 + m dt for m = 0..n_steps, always computed by multiplication.
struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.0;
  std::size_t n_steps = 0;

  TimeGrid() = default;
  TimeGrid(double t0_, double dt_, std::size_t n_steps_);
  /// Grid from t0 to horizon with n_steps equal steps.
  static TimeGrid over(double t0, double horizon, std::size_t n_steps);

  double time(std::size_t m) const { return t0 + static_cast<double>(m) * dt; }
  double horizon() const { return time(n_steps); }
};

/// Read-only view of one simulated path: (n_steps + 1) x dimension values.
class PathView {
 public:
  PathView(const double* data, std::size_t n_steps, Eigen::Index dimension, const TimeGrid* grid)
      : data_(data), n_steps_(n_steps), dimension_(dimension), grid_(grid) {}

  double operator()(std::size_t step, Eigen::Index asset = 0) const {
    return data_[step * static_cast<std::size_t>(dimension_) + static_cast<std::size_t>(asset)];
  }
  double terminal(Eigen::Index asset = 0) const { return (*this)(n_steps_, asset); }
  std::size_t n_steps() const { return n_steps_; }
  Eigen::Index dimension() const { return dimension_; }
  const TimeGrid& grid() const { return *grid_; }

 private:
  const double* data_;
  std::size_t n_steps_;
  Eigen::Index dimension_;
  const TimeGrid* grid_;
};

/// Simulated trajectories on a shared grid, stored path-major:
/// values[(path * (n_steps + 1) + step) * dimension + asset].
struct PathBatch {
  TimeGrid grid;
  std::size_t n_paths = 0;
  Eigen::Index dimension = 1;
  std::uint64_t seed = 0;
  std::uint64_t model_hash = 0;
  std::vector<double> values;

  PathView path(std::size_t i) const {
    return PathView(values.data() + i * (grid.n_steps + 1) * static_cast<std::size_t>(dimension),
                    grid.n_steps, dimension, &grid);
  }
  double at(std::size_t path, std::size_t step, Eigen::Index asset = 0) const {
    return values[(path * (grid.n_steps + 1) + step) * static_cast<std::size_t>(dimension) +
                  static_cast<std::size_t>(asset)];
  }
};

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_paths = 0;
};

/// Mean and standard error of per-path samples, reduced pairwise.
MCEstimate summarize(std::span<const double> samples);

struct SimulationOptions {
  std::size_t threads = 1;
};

/// One Euler step: S + mu(t,S) dt + sigma(t,S) sqrt(dt) xi.
Vector evolve_step(const ModelSpec& model, double t, const Vector& s, const Vector& xi, double dt);
double evolve_step(const ModelSpec& model, double t, double s, double xi, double dt);

PathBatch simulate_paths(const ModelSpec& model, const Vector& s0, const TimeGrid& grid,
                         std::size_t n_paths, std::uint64_t seed, SimulationOptions opts = {});

using PathFunctional = std::function<double(const PathView&)>;
/// Several outputs per path, written into out (size fixed by the caller).
using PathFunctionals = std::function<void(const PathView&, std::span<double> out)>;

MCEstimate expectation(const PathFunctional& f, const PathBatch& batch);

/// Simulates paths one at a time and reduces n_outputs functionals without
/// storing the batch. Produces exactly the estimates expectation() would give
/// on the batch from simulate_paths with the same arguments.
std::vector<MCEstimate> stream_expectations(const ModelSpec& model, const Vector& s0,
                                            const TimeGrid& grid, std::size_t n_paths,
                                            std::uint64_t seed, std::size_t n_outputs,
                                            const PathFunctionals& f, SimulationOptions opts = {});
MCEstimate stream_expectation(const ModelSpec& model, const Vector& s0, const TimeGrid& grid,
                              std::size_t n_paths, std::uint64_t seed, const PathFunctional& f,
                              SimulationOptions opts = {});

/// Monte Carlo estimate of E exp(sum_{m,a} J(m,a) S(m,a)); J is
/// (n_steps + 1) x dimension.
MCEstimate mgf(const Matrix& j, const PathBatch& batch);

/// Terminal values drawn from the closed-form solution of a bm/gbm/vasicek
/// model (exact in law at any horizon). Empty for other models.
std::optional<std::vector<double>> sample_exact_terminal(const ModelSpec& model, double s0,
                                                         double t0, double horizon,
                                                         std::size_t n_paths, std::uint64_t seed);

/// A smooth scalar map X = f(t, S) with its partial derivatives.
struct ItoMap {
  std::function<double(double, double)> value;
  std::function<double(double, double)> d_t;
  std::function<double(double, double)> d_s;
  std::function<double(double, double)> d_ss;
};

struct ItoReport {
  double empirical_drift = 0.0;
  double predicted_drift = 0.0;
  double empirical_vol = 0.0;
  double predicted_vol = 0.0;
  double z_drift = 0.0;  // (mean dX - predicted_drift dt) / SE
  double z_vol = 0.0;    // (var dX - predicted_vol^2 dt) / SE(var)
};

/// One Euler step from (t0, S0), compared against Ito's formula:
/// drift f_t + mu f_s + sigma^2 f_ss / 2 and vol sigma f_s.
ItoReport ito_check(const ModelSpec& model, const ItoMap& f, double s0, double t0, double dt,
                    std::size_t n_paths, std::uint64_t seed, SimulationOptions opts = {});

struct TerminalMoments {
  double dt = 0.0;
  double mean = 0.0;
  double mean_se = 0.0;
  double variance = 0.0;
  double variance_se = 0.0;
};

struct ScalingReport {
  TerminalMoments coarse;
  TerminalMoments fine;
  double z_mean = 0.0;
  double z_variance = 0.0;
  std::optional<double> exact_mean;
  std::optional<double> exact_variance;
  std::optional<double> coarse_mean_bias;
  std::optional<double> fine_mean_bias;
};

/// Terminal mean/variance at step dt and dt / refine_factor. The fine run
/// uses a seed derived from `seed` so the two estimates are independent.
ScalingReport scaling_check(const ModelSpec& model, double s0, double horizon, double dt,
                            std::size_t refine_factor, std::size_t n_paths, std::uint64_t seed,
                            SimulationOptions opts = {});

/// Terminal mean and variance of the closed-form models started at s0.
std::optional<std::pair<double, double>> exact_terminal_moments(const ModelSpec& model, double s0,
                                                                double horizon);

}  // namespace stochastica
