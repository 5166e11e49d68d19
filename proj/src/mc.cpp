#include "stochastica/mc.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "stochastica/errors.hpp"
#include "stochastica/numerics.hpp"
#include "stochastica/parallel.hpp"
#include "stochastica/rng.hpp"

namespace stochastica {

TimeGrid::TimeGrid(double t0_, double dt_, std::size_t n_steps_) : t0(t0_), dt(dt_), n_steps(n_steps_) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("time grid: dt must be > 0");
  if (n_steps == 0) throw DomainError("time grid: n_steps must be positive");
}

TimeGrid TimeGrid::over(double t0, double horizon, std::size_t n_steps) {
  if (n_steps == 0) throw DomainError("time grid: n_steps must be positive");
  return TimeGrid(t0, (horizon - t0) / static_cast<double>(n_steps), n_steps);
}

MCEstimate summarize(std::span<const double> samples) {
  const std::size_t n = samples.size();
  MCEstimate est{0.0, 0.0, n};
  if (n == 0) return est;
  est.mean = numerics::pairwise_sum(samples) / static_cast<double>(n);
  if (n > 1) {
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = samples[i] - est.mean;
      sq[i] = d * d;
    }
    const double var = numerics::pairwise_sum(std::span<const double>(sq)) / static_cast<double>(n - 1);
    est.std_error = std::sqrt(var / static_cast<double>(n));
  }
  return est;
}

namespace {

[[noreturn]] void report_non_finite(std::size_t path, std::size_t step, double t, double s) {
  std::ostringstream msg;
  msg.precision(17);
  msg << "non-finite state at path " << path << ", step " << step << " (t=" << t << ", S=" << s << ")";
  throw NumericalError(msg.str());
}

/// Fills one path (n_steps + 1) x N into out.
class PathSimulator {
 public:
  PathSimulator(const ModelSpec& model, const Vector& s0, const TimeGrid& grid, std::uint64_t seed)
      : model_(model),
        s0_(s0),
        grid_(grid),
        rng_(seed, rng::Stream::paths, static_cast<std::uint32_t>(model.noise_dim())),
        sqrt_dt_(std::sqrt(grid.dt)) {
    if (s0.size() != model.dimension()) throw ValidationError("initial state has wrong dimension");
    if (!s0.allFinite()) throw ValidationError("initial state not finite");
    draws_.resize(grid.n_steps * static_cast<std::size_t>(model.noise_dim()));
    if (!model.is_scalar()) {
      s_.resize(model.dimension());
      mu_.resize(model.dimension());
      sig_.resize(model.dimension(), model.noise_dim());
      xi_.resize(model.noise_dim());
    }
  }

  void run(std::size_t path, double* out) {
    rng_.normals(path, 0, draws_.size(), draws_.data());
    if (model_.is_scalar()) {
      run_scalar(path, out);
    } else {
      run_vector(path, out);
    }
  }

 private:
  void run_scalar(std::size_t path, double* out) {
    const auto& drift = model_.scalar_drift();
    const auto& vol = model_.scalar_vol();
    const double dt = grid_.dt;
    double s = s0_(0);
    out[0] = s;
    for (std::size_t m = 0; m < grid_.n_steps; ++m) {
      const double t = grid_.time(m);
      const double xi = draws_[m];
      const double next = s + drift(t, s) * dt + vol(t, s) * sqrt_dt_ * xi;
      if (!std::isfinite(next)) report_non_finite(path, m + 1, t, s);
      s = next;
      out[m + 1] = s;
    }
  }

  void run_vector(std::size_t path, double* out) {
    const Eigen::Index n = model_.dimension();
    s_ = s0_;
    Eigen::Map<Vector>(out, n) = s_;
    for (std::size_t m = 0; m < grid_.n_steps; ++m) {
      const double t = grid_.time(m);
      xi_ = Eigen::Map<const Vector>(draws_.data() + m * static_cast<std::size_t>(xi_.size()), xi_.size());
      model_.drift_into(t, s_, mu_);
      model_.vol_into(t, s_, sig_);
      s_ += mu_ * grid_.dt + sqrt_dt_ * (sig_ * xi_);
      if (!s_.allFinite()) report_non_finite(path, m + 1, t, s_(0));
      Eigen::Map<Vector>(out + (m + 1) * static_cast<std::size_t>(n), n) = s_;
    }
  }

  const ModelSpec& model_;
  Vector s0_;
  TimeGrid grid_;
  rng::CounterRng rng_;
  double sqrt_dt_;
  std::vector<double> draws_;
  Vector s_, mu_, xi_;
  Matrix sig_;
};

}  // namespace

Vector evolve_step(const ModelSpec& model, double t, const Vector& s, const Vector& xi, double dt) {
  if (!(dt > 0.0)) throw DomainError("evolve_step: dt must be > 0");
  if (xi.size() != model.noise_dim()) throw ValidationError("evolve_step: noise vector has wrong dimension");
  const Vector mu = model.drift(t, s);
  const Matrix sig = model.vol(t, s);
  if (!mu.allFinite() || !sig.allFinite()) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "evolve_step: non-finite drift/vol at t=" << t << ", S=(" << s.transpose() << ")";
    throw NumericalError(msg.str());
  }
  return s + mu * dt + std::sqrt(dt) * (sig * xi);
}

double evolve_step(const ModelSpec& model, double t, double s, double xi, double dt) {
  if (!model.is_scalar()) throw ValidationError("evolve_step: scalar overload needs a one-dimensional model");
  if (!(dt > 0.0)) throw DomainError("evolve_step: dt must be > 0");
  const double mu = model.drift(t, s);
  const double sig = model.vol(t, s);
  if (!std::isfinite(mu) || !std::isfinite(sig)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "evolve_step: non-finite drift/vol at t=" << t << ", S=" << s;
    throw NumericalError(msg.str());
  }
  return s + mu * dt + sig * std::sqrt(dt) * xi;
}

PathBatch simulate_paths(const ModelSpec& model, const Vector& s0, const TimeGrid& grid,
                         std::size_t n_paths, std::uint64_t seed, SimulationOptions opts) {
  if (n_paths == 0) throw DomainError("simulate_paths: n_paths must be >= 1");
  PathBatch batch;
  batch.grid = grid;
  batch.n_paths = n_paths;
  batch.dimension = model.dimension();
  batch.seed = seed;
  batch.model_hash = model.hash();
  const std::size_t stride = (grid.n_steps + 1) * static_cast<std::size_t>(model.dimension());
  batch.values.resize(n_paths * stride);
  parallel_chunks(n_paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    PathSimulator sim(model, s0, grid, seed);
    for (std::size_t i = begin; i < end; ++i) sim.run(i, batch.values.data() + i * stride);
  });
  return batch;
}

MCEstimate expectation(const PathFunctional& f, const PathBatch& batch) {
  std::vector<double> samples(batch.n_paths);
  for (std::size_t i = 0; i < batch.n_paths; ++i) samples[i] = f(batch.path(i));
  return summarize(samples);
}

std::vector<MCEstimate> stream_expectations(const ModelSpec& model, const Vector& s0,
                                            const TimeGrid& grid, std::size_t n_paths,
                                            std::uint64_t seed, std::size_t n_outputs,
                                            const PathFunctionals& f, SimulationOptions opts) {
  if (n_paths == 0) throw DomainError("stream_expectations: n_paths must be >= 1");
  const std::size_t stride = (grid.n_steps + 1) * static_cast<std::size_t>(model.dimension());
  // samples[k * n_paths + i] holds output k of path i.
  std::vector<double> samples(n_outputs * n_paths);
  parallel_chunks(n_paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    PathSimulator sim(model, s0, grid, seed);
    std::vector<double> buffer(stride);
    std::vector<double> out(n_outputs);
    for (std::size_t i = begin; i < end; ++i) {
      sim.run(i, buffer.data());
      f(PathView(buffer.data(), grid.n_steps, model.dimension(), &grid), out);
      for (std::size_t k = 0; k < n_outputs; ++k) samples[k * n_paths + i] = out[k];
    }
  });
  std::vector<MCEstimate> result;
  result.reserve(n_outputs);
  for (std::size_t k = 0; k < n_outputs; ++k) {
    result.push_back(summarize(std::span<const double>(samples).subspan(k * n_paths, n_paths)));
  }
  return result;
}

MCEstimate stream_expectation(const ModelSpec& model, const Vector& s0, const TimeGrid& grid,
                              std::size_t n_paths, std::uint64_t seed, const PathFunctional& f,
                              SimulationOptions opts) {
  return stream_expectations(
      model, s0, grid, n_paths, seed, 1,
      [&f](const PathView& p, std::span<double> out) { out[0] = f(p); }, opts)[0];
}

MCEstimate mgf(const Matrix& j, const PathBatch& batch) {
  const auto rows = static_cast<Eigen::Index>(batch.grid.n_steps + 1);
  if (j.rows() != rows || j.cols() != batch.dimension) {
    throw ValidationError("mgf: coefficient matrix must be (n_steps + 1) x dimension");
  }
  std::vector<double> exponents(batch.n_paths);
  double max_exponent = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < batch.n_paths; ++i) {
    const PathView p = batch.path(i);
    double e = 0.0;
    for (Eigen::Index m = 0; m < rows; ++m) {
      for (Eigen::Index a = 0; a < batch.dimension; ++a) {
        if (j(m, a) != 0.0) e += j(m, a) * p(static_cast<std::size_t>(m), a);
      }
    }
    exponents[i] = e;
    max_exponent = std::max(max_exponent, e);
  }
  if (!(max_exponent < 700.0)) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "mgf: exponent overflow, max exponent " << max_exponent;
    throw NumericalError(msg.str());
  }
  for (auto& e : exponents) e = std::exp(e);
  return summarize(exponents);
}

std::optional<std::pair<double, double>> exact_terminal_moments(const ModelSpec& model, double s0,
                                                                double horizon) {
  const auto p = closed_form_params(model);
  if (!p) return std::nullopt;
  const double t = horizon;
  switch (p->kind) {
    case ModelKind::bm:
      return std::make_pair(s0 + p->mu * t, p->sigma * p->sigma * t);
    case ModelKind::gbm: {
      const double m = s0 * std::exp(p->mu * t);
      return std::make_pair(m, m * m * std::expm1(p->sigma * p->sigma * t));
    }
    case ModelKind::vasicek: {
      const double decay = std::exp(-p->a * t);
      return std::make_pair(s0 * decay + p->b * (1.0 - decay),
                            p->sigma * p->sigma * -std::expm1(-2.0 * p->a * t) / (2.0 * p->a));
    }
    default:
      return std::nullopt;
  }
}

std::optional<std::vector<double>> sample_exact_terminal(const ModelSpec& model, double s0, double t0,
                                                         double horizon, std::size_t n_paths,
                                                         std::uint64_t seed) {
  const auto p = closed_form_params(model);
  if (!p) return std::nullopt;
  const double t = horizon - t0;
  const rng::CounterRng rng(seed, rng::Stream::exact_sampler);
  std::vector<double> out(n_paths);
  for (std::size_t i = 0; i < n_paths; ++i) {
    const double xi = rng.normal(i, 0, 0);
    switch (p->kind) {
      case ModelKind::bm:
        out[i] = s0 + p->mu * t + p->sigma * std::sqrt(t) * xi;
        break;
      case ModelKind::gbm:
        out[i] = s0 * std::exp((p->mu - 0.5 * p->sigma * p->sigma) * t + p->sigma * std::sqrt(t) * xi);
        break;
      default: {
        const auto [mean, var] = *exact_terminal_moments(model, s0, t);
        out[i] = mean + std::sqrt(var) * xi;
      }
    }
  }
  return out;
}

namespace {

void validate_derivative(const char* name, double supplied, double finite_difference) {
  if (!(std::abs(supplied - finite_difference) <= 1e-6 * std::max(1.0, std::abs(supplied)))) {
    std::ostringstream msg;
    msg.precision(12);
    msg << "ito_check: supplied " << name << " = " << supplied
        << " disagrees with finite difference " << finite_difference;
    throw ValidationError(msg.str());
  }
}

struct SampleMoments {
  double mean, variance, mean_se, variance_se;
};

SampleMoments moments(const std::vector<double>& x) {
  const std::size_t n = x.size();
  const double mean = numerics::pairwise_sum(x) / static_cast<double>(n);
  std::vector<double> c2(n), c4(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    c2[i] = d * d;
    c4[i] = c2[i] * c2[i];
  }
  const double m2 = numerics::pairwise_sum(c2) / static_cast<double>(n);
  const double m4 = numerics::pairwise_sum(c4) / static_cast<double>(n);
  const double variance = m2 * static_cast<double>(n) / static_cast<double>(n - 1);
  return {mean, variance, std::sqrt(variance / static_cast<double>(n)),
          std::sqrt(std::max(0.0, m4 - m2 * m2) / static_cast<double>(n))};
}

}  // namespace

ItoReport ito_check(const ModelSpec& model, const ItoMap& f, double s0, double t0, double dt,
                    std::size_t n_paths, std::uint64_t seed, SimulationOptions opts) {
  if (!model.is_scalar()) throw ValidationError("ito_check: model must be one-dimensional");
  if (!(dt > 0.0)) throw DomainError("ito_check: dt must be > 0");
  if (n_paths < 2) throw DomainError("ito_check: need at least 2 paths");

  const double h = 1e-4 * std::max(1.0, std::abs(s0));
  const double ht = 1e-4 * std::max(1.0, std::abs(t0));
  const double f0 = f.value(t0, s0);
  const double fp = f.value(t0, s0 + h), fm = f.value(t0, s0 - h);
  validate_derivative("d/dS", f.d_s(t0, s0), (fp - fm) / (2.0 * h));
  validate_derivative("d2/dS2", f.d_ss(t0, s0), (fp - 2.0 * f0 + fm) / (h * h));
  validate_derivative("d/dt", f.d_t(t0, s0), (f.value(t0 + ht, s0) - f.value(t0 - ht, s0)) / (2.0 * ht));

  const double mu = model.drift(t0, s0);
  const double sigma = model.vol(t0, s0);
  ItoReport report;
  report.predicted_drift = f.d_t(t0, s0) + mu * f.d_s(t0, s0) + 0.5 * sigma * sigma * f.d_ss(t0, s0);
  report.predicted_vol = std::abs(sigma * f.d_s(t0, s0));

  const TimeGrid grid(t0, dt, 1);
  const Vector start = Vector::Constant(1, s0);
  std::vector<double> dx(n_paths);
  parallel_chunks(n_paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    const rng::CounterRng rng(seed);
    for (std::size_t i = begin; i < end; ++i) {
      const double s1 = evolve_step(model, t0, s0, rng.normal(i, 0, 0), dt);
      dx[i] = f.value(t0 + dt, s1) - f0;
      if (!std::isfinite(dx[i])) report_non_finite(i, 1, t0, s1);
    }
  });
  const SampleMoments m = moments(dx);
  report.empirical_drift = m.mean / dt;
  report.empirical_vol = std::sqrt(m.variance / dt);
  report.z_drift = m.mean_se > 0.0 ? (m.mean - report.predicted_drift * dt) / m.mean_se : 0.0;
  const double predicted_var = report.predicted_vol * report.predicted_vol * dt;
  report.z_vol = m.variance_se > 0.0 ? (m.variance - predicted_var) / m.variance_se : 0.0;
  return report;
}

namespace {

TerminalMoments terminal_moments(const ModelSpec& model, double s0, const TimeGrid& grid,
                                 std::size_t n_paths, std::uint64_t seed, SimulationOptions opts) {
  std::vector<double> terminal(n_paths);
  const Vector start = Vector::Constant(model.dimension(), s0);
  parallel_chunks(n_paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    PathSimulator sim(model, start, grid, seed);
    std::vector<double> buffer((grid.n_steps + 1) * static_cast<std::size_t>(model.dimension()));
    for (std::size_t i = begin; i < end; ++i) {
      sim.run(i, buffer.data());
      terminal[i] = buffer[grid.n_steps * static_cast<std::size_t>(model.dimension())];
    }
  });
  const SampleMoments m = moments(terminal);
  return {grid.dt, m.mean, m.mean_se, m.variance, m.variance_se};
}

std::size_t steps_for(double horizon, double dt) {
  const double ratio = horizon / dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio)) {
    throw DomainError("scaling_check: horizon must be a positive integer multiple of dt");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

ScalingReport scaling_check(const ModelSpec& model, double s0, double horizon, double dt,
                            std::size_t refine_factor, std::size_t n_paths, std::uint64_t seed,
                            SimulationOptions opts) {
  if (refine_factor < 2) throw DomainError("scaling_check: refine_factor must be >= 2");
  if (n_paths < 2) throw DomainError("scaling_check: need at least 2 paths");
  const std::size_t n_coarse = steps_for(horizon, dt);
  const TimeGrid coarse(0.0, dt, n_coarse);
  const TimeGrid fine(0.0, dt / static_cast<double>(refine_factor), n_coarse * refine_factor);

  ScalingReport r;
  r.coarse = terminal_moments(model, s0, coarse, n_paths, seed, opts);
  r.fine = terminal_moments(model, s0, fine, n_paths, rng::splitmix64(seed), opts);
  const double se_mean = std::hypot(r.coarse.mean_se, r.fine.mean_se);
  const double se_var = std::hypot(r.coarse.variance_se, r.fine.variance_se);
  r.z_mean = se_mean > 0.0 ? (r.coarse.mean - r.fine.mean) / se_mean : 0.0;
  r.z_variance = se_var > 0.0 ? (r.coarse.variance - r.fine.variance) / se_var : 0.0;
  if (const auto exact = exact_terminal_moments(model, s0, horizon)) {
    r.exact_mean = exact->first;
    r.exact_variance = exact->second;
    r.coarse_mean_bias = r.coarse.mean - exact->first;
    r.fine_mean_bias = r.fine.mean - exact->first;
  }
  return r;
}

}  // namespace stochastica
