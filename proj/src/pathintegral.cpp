#include "stochastica/pathintegral.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "stochastica/errors.hpp"
#include "stochastica/numerics.hpp"
#include "stochastica/parallel.hpp"
#include "stochastica/rng.hpp"

namespace stochastica {

ShortTimeKernel::ShortTimeKernel(const ModelSpec& model, double t, double dt)
    : model_(&model), t_(t), dt_(dt) {
  if (!model.is_scalar()) throw DomainError("short-time kernel: model must be one-dimensional");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("short-time kernel: dt must be > 0");
}

double ShortTimeKernel::operator()(double s_from, double s_to) const {
  constexpr double kInvSqrt2Pi = 0.3989422804014326779;
  const double w = width(s_from);
  if (w == 0.0) throw DomainError("short-time kernel: degenerate (sigma = 0) at this point");
  const double z = (s_to - center(s_from)) / w;
  return kInvSqrt2Pi * std::exp(-0.5 * z * z) / w;
}

ShortTimeKernel ShortTimeKernel::shifted(std::size_t m) const {
  return ShortTimeKernel(*model_, t_ + static_cast<double>(m) * dt_, dt_);
}

ShortTimeKernel one_step_kernel(const ModelSpec& model, double t, double dt) {
  return ShortTimeKernel(model, t, dt);
}

namespace {

constexpr double kTruncation = 8.0;

// Normalized kernel row: mass fractions landing on nodes first..first+w.size()-1.
struct Row {
  Eigen::Index first = 0;
  std::vector<double> w;
  double captured = 1.0;  // Gaussian mass falling inside the lattice cells
};

class Lattice {
 public:
  explicit Lattice(const Vector& x) : x_(x), weights_(numerics::trapezoid_weights(x)) {
    if (x.size() < 3) throw ValidationError("lattice: need at least 3 nodes");
    h_ = (x(x.size() - 1) - x(0)) / static_cast<double>(x.size() - 1);
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
      if (std::abs(x(i + 1) - x(i) - h_) > 1e-9 * std::max(h_, std::abs(x(i))))
        throw ValidationError("lattice: nodes must be uniform");
    }
  }

  const Vector& nodes() const { return x_; }
  const Vector& weights() const { return weights_; }

  Row row(const ShortTimeKernel& k, double s_from) const {
    const double c = k.center(s_from);
    const double w = k.width(s_from);
    if (!std::isfinite(c) || !std::isfinite(w)) {
      std::ostringstream msg;
      msg << "lattice: non-finite kernel at t=" << k.t() << ", S=" << s_from;
      throw NumericalError(msg.str());
    }
    const Eigen::Index n = x_.size();
    const double lo = x_(0) - 0.5 * h_;
    const double hi = x_(n - 1) + 0.5 * h_;
    Row r;
    if (w == 0.0) {
      // deterministic shift: split the mass linearly between the neighbours
      if (c < x_(0) || c > x_(n - 1)) {
        r.captured = 0.0;
        r.first = c < x_(0) ? 0 : n - 1;
        r.w = {1.0};
        return r;
      }
      const Eigen::Index j = std::min<Eigen::Index>(
          n - 2, static_cast<Eigen::Index>(std::floor((c - x_(0)) / h_)));
      const double f = (c - x_(j)) / h_;
      r.first = j;
      r.w = {1.0 - f, f};
      return r;
    }
    r.captured = 0.5 * (std::erfc(-(hi - c) / (w * std::sqrt(2.0))) -
                         std::erfc(-(lo - c) / (w * std::sqrt(2.0))));
    const Eigen::Index j0 = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::ceil((c - kTruncation * w - x_(0)) / h_)), 0, n - 1);
    const Eigen::Index j1 = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::floor((c + kTruncation * w - x_(0)) / h_)), 0, n - 1);
    r.first = j0;
    double sum = 0.0;
    for (Eigen::Index j = j0; j <= j1; ++j) {
      const double z = (x_(j) - c) / w;
      const double v = std::exp(-0.5 * z * z) * weights_(j);
      r.w.push_back(v);
      sum += v;
    }
    if (!(sum > 0.0)) {
      // kernel narrower than a cell and centred between nodes: nearest node
      const Eigen::Index j = std::clamp<Eigen::Index>(
          static_cast<Eigen::Index>(std::lround((c - x_(0)) / h_)), 0, n - 1);
      r.first = j;
      r.w = {1.0};
      return r;
    }
    for (double& v : r.w) v /= sum;
    return r;
  }

  std::vector<Row> rows(const ShortTimeKernel& k) const {
    std::vector<Row> out(static_cast<std::size_t>(x_.size()));
    for (Eigen::Index i = 0; i < x_.size(); ++i) out[static_cast<std::size_t>(i)] = row(k, x_(i));
    return out;
  }

  // masses -> masses; returns leaked mass
  static double apply(const std::vector<Row>& rows, const Vector& m, Vector& out) {
    out.setZero(m.size());
    double leaked = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double mi = m(i);
      if (mi == 0.0) continue;
      const Row& r = rows[static_cast<std::size_t>(i)];
      for (std::size_t q = 0; q < r.w.size(); ++q) out(r.first + static_cast<Eigen::Index>(q)) += mi * r.w[q];
      leaked += mi * (1.0 - r.captured);
    }
    return leaked;
  }

 private:
  Vector x_;
  Vector weights_;
  double h_ = 0.0;
};

void check_leak(double leaked, double t) {
  if (leaked > 0.01) {
    std::ostringstream msg;
    msg << "lattice: " << 100.0 * leaked << "% of the mass leaked past the grid edges by t=" << t
        << "; widen the grid";
    throw NumericalError(msg.str());
  }
}

// Propagates masses through `n_steps` kernel steps starting at step `offset`,
// calling visit(step_index, masses) after each step.
template <typename Visit>
double march(const Lattice& lattice, const ShortTimeKernel& kernel, Vector m, std::size_t offset,
             std::size_t n_steps, Visit&& visit) {
  double leaked = 0.0;
  std::optional<std::vector<Row>> fixed;
  if (kernel.model().time_homogeneous()) fixed = lattice.rows(kernel);
  Vector next;
  for (std::size_t s = 0; s < n_steps; ++s) {
    const ShortTimeKernel k = kernel.shifted(offset + s);
    if (fixed) {
      leaked += Lattice::apply(*fixed, m, next);
    } else {
      leaked += Lattice::apply(lattice.rows(k), m, next);
    }
    m.swap(next);
    check_leak(leaked, k.t() + k.dt());
    visit(offset + s, m);
  }
  return leaked;
}

Vector first_step_masses(const Lattice& lattice, const ShortTimeKernel& kernel, double s0,
                         double& leaked) {
  const Row r = lattice.row(kernel, s0);
  Vector m = Vector::Zero(lattice.nodes().size());
  for (std::size_t q = 0; q < r.w.size(); ++q) m(r.first + static_cast<Eigen::Index>(q)) = r.w[q];
  leaked = 1.0 - r.captured;
  check_leak(leaked, kernel.t() + kernel.dt());
  return m;
}

}  // namespace

DensityGrid propagate(const ShortTimeKernel& kernel, const DensityGrid& initial,
                      std::size_t n_steps, PropagationReport* report) {
  if (n_steps == 0) return initial;
  const Lattice lattice(initial.s());
  Vector m = lattice.weights().cwiseProduct(initial.p());
  Vector last = m;
  const double leaked =
      march(lattice, kernel, m, 0, n_steps, [&](std::size_t, const Vector& v) { last = v; });
  if (report) report->leaked_mass = leaked;
  last /= last.sum();
  DensityGrid out(initial.s(), last.cwiseQuotient(lattice.weights()),
                  kernel.t() + static_cast<double>(n_steps) * kernel.dt());
  out.regularization_width = initial.regularization_width;
  return out;
}

DensityGrid propagate_from_point(const ShortTimeKernel& kernel, double s0, const Vector& nodes,
                                 std::size_t n_steps, PropagationReport* report) {
  if (n_steps == 0) throw DomainError("propagate_from_point: n_steps must be positive");
  const Lattice lattice(nodes);
  double leaked = 0.0;
  Vector last = first_step_masses(lattice, kernel, s0, leaked);
  leaked += march(lattice, kernel, last, 1, n_steps - 1,
                  [&](std::size_t, const Vector& v) { last = v; });
  if (report) report->leaked_mass = leaked;
  last /= last.sum();
  return DensityGrid(nodes, last.cwiseQuotient(lattice.weights()),
                     kernel.t() + static_cast<double>(n_steps) * kernel.dt());
}

TransitionMatrix kernel_transition_matrix(const ShortTimeKernel& kernel, const Vector& nodes,
                                          std::size_t n_steps) {
  if (n_steps == 0) throw DomainError("kernel transition matrix: n_steps must be positive");
  const Lattice lattice(nodes);
  const Eigen::Index n = nodes.size();
  Matrix m = Matrix::Identity(n, n);
  Matrix next(n, n);
  for (std::size_t s = 0; s < n_steps; ++s) {
    const std::vector<Row> rows = lattice.rows(kernel.shifted(s));
    next.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const Row& r = rows[static_cast<std::size_t>(i)];
      for (std::size_t q = 0; q < r.w.size(); ++q)
        next.col(r.first + static_cast<Eigen::Index>(q)) += r.w[q] * m.col(i);
    }
    m.swap(next);
  }
  TransitionMatrix out;
  out.source = nodes;
  out.target = nodes;
  out.t0 = kernel.t();
  out.t = kernel.t() + static_cast<double>(n_steps) * kernel.dt();
  out.values = m * lattice.weights().cwiseInverse().asDiagonal();
  return out;
}

namespace {

struct WorkingLattice {
  Coordinates coords;
  ModelSpec model;
  double x0;
  Vector nodes;
};

WorkingLattice working_lattice(const ModelSpec& model, double s0, double t0, double t,
                               std::size_t n_steps, const LatticeOptions& opts) {
  const Coordinates coords = resolve_coordinates(model, s0, opts.coordinates);
  const bool log = coords == Coordinates::log_price;
  ModelSpec work = log ? log_price_model(model) : model;
  const double x0 = log ? std::log(s0) : s0;
  Resolution res;
  res.n_space = opts.n_space;
  res.n_steps = n_steps;
  res.width_sd = opts.width_sd;
  const Vector nodes = default_space_grid(work, x0, t0, t, res).nodes();
  return {coords, std::move(work), x0, nodes};
}

}  // namespace

DensityGrid lattice_density(const ModelSpec& model, double s0, double t0, double t,
                            const LatticeOptions& opts, PropagationReport* report) {
  const std::size_t n_steps = opts.n_steps;
  if (n_steps == 0) throw DomainError("lattice density: n_steps must be positive");
  const WorkingLattice w = working_lattice(model, s0, t0, t, n_steps, opts);
  const ShortTimeKernel k(w.model, t0, (t - t0) / static_cast<double>(n_steps));
  DensityGrid out = propagate_from_point(k, w.x0, w.nodes, n_steps, report);
  if (w.coords == Coordinates::log_price) out = change_of_variable(out, exp_map());
  return out;
}

std::size_t steps_for(double t0, double t, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be > 0");
  if (!(t > t0)) throw DomainError("need t > t0");
  const double n = std::ceil((t - t0) / dt - 1e-9);
  return static_cast<std::size_t>(std::max(1.0, n));
}

DensityGrid GreensFunction::slice(Eigen::Index k) const {
  return DensityGrid(s, values.row(k).transpose(), times(k));
}

double GreensFunction::total_mass(Eigen::Index k) const {
  return weights.dot(values.row(k).transpose());
}

GreensFunction greens_function(const ModelSpec& model, const DiscountCurve& curve, double t0,
                               double s0, double t, double dt, const LatticeOptions& opts) {
  const std::size_t n_steps = steps_for(t0, t, dt);
  const double step = (t - t0) / static_cast<double>(n_steps);
  const WorkingLattice w = working_lattice(model, s0, t0, t, n_steps, opts);
  const Lattice lattice(w.nodes);
  const ShortTimeKernel kernel(w.model, t0, step);
  const bool log = w.coords == Coordinates::log_price;
  const Eigen::Index n = w.nodes.size();

  GreensFunction g;
  g.t0 = t0;
  g.s0 = s0;
  g.s = log ? Vector(w.nodes.array().exp().matrix()) : w.nodes;
  g.times.resize(static_cast<Eigen::Index>(n_steps));
  g.discount.resize(static_cast<Eigen::Index>(n_steps));
  g.values.resize(static_cast<Eigen::Index>(n_steps), n);
  // mass per node -> discounted density per unit price
  const Vector to_density =
      log ? Vector(lattice.weights().cwiseProduct(g.s).cwiseInverse()) : Vector(lattice.weights().cwiseInverse());
  g.weights = log ? Vector(lattice.weights().cwiseProduct(g.s)) : lattice.weights();
  auto store = [&](std::size_t k, const Vector& m) {
    const auto row = static_cast<Eigen::Index>(k);
    const double tk = t0 + static_cast<double>(k + 1) * step;
    g.times(row) = tk;
    g.discount(row) = curve.discount(t0, tk);
    g.values.row(row) = (g.discount(row) / m.sum()) * m.cwiseProduct(to_density).transpose();
  };
  double leaked = 0.0;
  const Vector m1 = first_step_masses(lattice, kernel, w.x0, leaked);
  store(0, m1);
  leaked += march(lattice, kernel, m1, 1, n_steps - 1, store);
  g.leaked_mass = leaked;
  return g;
}

MCEstimate pi_expectation(const ModelSpec& model, const std::function<double(double)>& f,
                          double t0, double s0, double horizon, double dt, std::size_t n_paths,
                          std::uint64_t seed, SimulationOptions opts) {
  if (n_paths < 2) throw DomainError("pi_expectation: need at least 2 paths");
  const std::size_t n_steps = steps_for(t0, horizon, dt);
  const ShortTimeKernel kernel(model, t0, (horizon - t0) / static_cast<double>(n_steps));
  const rng::CounterRng draws(seed, rng::Stream::kernel_sampler);
  std::vector<double> samples(n_paths);
  parallel_chunks(n_paths, opts.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      double s = s0;
      for (std::size_t m = 0; m < n_steps; ++m) {
        const ShortTimeKernel k = kernel.shifted(m);
        s = k.center(s) + k.width(s) * draws.normal(p, static_cast<std::uint32_t>(m), 0);
        if (!std::isfinite(s)) {
          std::ostringstream msg;
          msg << "pi_expectation: non-finite state at path " << p << ", step " << m;
          throw NumericalError(msg.str());
        }
      }
      samples[p] = f(s);
    }
  });
  return summarize(samples);
}

}  // namespace stochastica
