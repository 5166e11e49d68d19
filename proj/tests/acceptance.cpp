// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "stochastica/density.hpp"
#include "stochastica/mc.hpp"
#include "stochastica/pathintegral.hpp"
#include "stochastica/pricing.hpp"
#include "stochastica/risk.hpp"
#include "stochastica/rng.hpp"

using namespace stochastica;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct GridPoint {
  double k, sigma, t;
};

constexpr double kS0 = 100.0;
constexpr double kRate = 0.05;

// results do not depend on the thread count
const SimulationOptions kThreads{std::max(1u, std::thread::hardware_concurrency())};

std::vector<GridPoint> call_grid() {
  std::vector<GridPoint> g;
  for (double kr : {0.8, 1.0, 1.2})
    for (double sigma : {0.1, 0.2, 0.4})
      for (double t : {0.25, 1.0, 2.0}) g.push_back({kr * kS0, sigma, t});
  return g;
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double relative(double a, double b) { return std::abs(a / b - 1.0); }

Outcome pricing_agreement() {
  const DiscountCurve curve = DiscountCurve::flat(kRate);
  double worst_pde = 0.0, worst_green = 0.0, worst_z = 0.0;
  std::uint64_t case_id = 0;
  for (const GridPoint& g : call_grid()) {
    const PayoffSpec pay = PayoffSpec::call(g.k, g.t);
    const double bs = bs_price({kS0, g.k, kRate, g.sigma, g.t});
    const double sigma = g.sigma;
    const double pde = pv_pde(pay, curve, [sigma](double, double) { return sigma; }, kS0).value;
    const ModelSpec model = make_gbm(kRate, g.sigma);
    const double green =
        pv_green(greens_function(risk_neutralize(model, curve), curve, 0.0, kS0, g.t, g.t / 50.0), pay).value;
    const MCPrice mc = pv_mc(model, curve, pay, kS0, g.t / 256.0, 1000000, rng::splitmix64(1000 + case_id++), kThreads);
    worst_pde = std::max(worst_pde, relative(pde, bs));
    worst_green = std::max(worst_green, relative(green, bs));
    worst_z = std::max(worst_z, std::abs(mc.estimate.mean - bs) / mc.estimate.std_error);
  }
  return {worst_pde <= 1e-3 && worst_green <= 1e-3 && worst_z <= 3.0,
          "max rel pde " + fmt("%.2e", worst_pde) + ", green " + fmt("%.2e", worst_green) + ", max |z| mc " +
              fmt("%.2f", worst_z)};
}

Outcome atm_closed_form() {
  const double price = bs_price({100, 100, 0.0, 0.2, 1.0});
  const double by_cdf = 100.0 * (2.0 * oracle::normal_cdf_quadrature(0.1) - 1.0);
  const double by_integral = oracle::call_by_quadrature(100, 100, 0.0, 0.2, 1.0);
  const double gap = std::max(std::abs(price - by_cdf), std::abs(price - by_integral));
  return {gap <= 1e-10, "price " + fmt("%.12f", price) + ", max gap to quadrature " + fmt("%.1e", gap)};
}

struct DensityCase {
  const char* name;
  ModelSpec model;
  double s0;
  double t;
};

std::vector<DensityCase> builtins() {
  return {{"bm", make_bm(0.1, 0.3), 1.0, 1.0},
          {"gbm", make_gbm(0.05, 0.2), 100.0, 1.0},
          {"vasicek", make_vasicek(1.0, 0.05, 0.02), 0.03, 1.0}};
}

// Below this the error is round-off and a refinement cannot shrink it further.
constexpr double kRoundOff = 1e-10;

bool refines(double coarse, double fine) { return fine < kRoundOff || coarse / fine >= 2.0; }

Outcome density_fidelity() {
  Outcome o;
  for (const DensityCase& c : builtins()) {
    const DensityFn exact = analytic_transition(c.model, 0.0, c.s0, c.t).function();
    double fp[2], pi[2];
    for (int h = 0; h < 2; ++h) {
      const int f = 1 << h;
      Resolution res;
      res.n_space = (res.n_space - 1) * f + 1;
      res.n_steps *= static_cast<std::size_t>(f);
      LatticeOptions lat;
      lat.n_space = res.n_space;
      lat.n_steps *= static_cast<std::size_t>(f);
      fp[h] = l1_distance(forward_density(c.model, c.s0, 0.0, c.t, res), exact);
      pi[h] = l1_distance(lattice_density(c.model, c.s0, 0.0, c.t, lat), exact);
    }
    const bool ok = fp[0] < 5e-3 && pi[0] < 5e-3 && refines(fp[0], fp[1]) && refines(pi[0], pi[1]);
    o.pass = o.pass && ok;
    o.detail += std::string(o.detail.empty() ? "" : "; ") + c.name + " fp " + fmt("%.2e", fp[0]) + "->" +
                fmt("%.2e", fp[1]) + " lattice " + fmt("%.2e", pi[0]) + "->" + fmt("%.2e", pi[1]);
  }
  return o;
}

Outcome chapman_kolmogorov() {
  Outcome o;
  for (const DensityCase& c : builtins()) {
    const Coordinates coords = resolve_coordinates(c.model, c.s0, Coordinates::automatic);
    const bool log = coords == Coordinates::log_price;
    Resolution res;
    res.n_space = 401;
    const pde::SpaceGrid g =
        default_space_grid(log ? log_price_model(c.model) : c.model, log ? std::log(c.s0) : c.s0, 0.0, c.t, res);
    const TransitionDensity ab{0.0, c.s0, forward_density(c.model, c.s0, 0.0, c.t / 2, g, 200, coords)};
    const TransitionDensity ac = compose_transition(ab, forward_transition_matrix(c.model, g, coords, c.t / 2, c.t, 200));
    const double l1 = l1_distance(ac.target, forward_density(c.model, c.s0, 0.0, c.t, g, 400, coords));
    o.pass = o.pass && l1 < 5e-3;
    o.detail += std::string(o.detail.empty() ? "" : ", ") + c.name + " L1 " + fmt("%.2e", l1);
  }
  return o;
}

Outcome ito_verification() {
  const ModelSpec gbm = make_gbm(0.08, 0.3);
  const ItoMap maps[] = {
      {[](double, double s) { return s; }, [](double, double) { return 0.0; }, [](double, double) { return 1.0; },
       [](double, double) { return 0.0; }},
      {[](double, double s) { return std::log(s); }, [](double, double) { return 0.0; },
       [](double, double s) { return 1.0 / s; }, [](double, double s) { return -1.0 / (s * s); }},
      {[](double, double s) { return s * s; }, [](double, double) { return 0.0; },
       [](double, double s) { return 2 * s; }, [](double, double) { return 2.0; }}};
  const char* names[] = {"S", "ln S", "S^2"};
  Outcome o;
  for (int i = 0; i < 3; ++i) {
    const ItoReport r = ito_check(gbm, maps[i], 100.0, 0.0, 1e-3, 1000000, 500 + static_cast<std::uint64_t>(i), kThreads);
    o.pass = o.pass && std::abs(r.z_drift) <= 4.0 && std::abs(r.z_vol) <= 4.0;
    if (i == 1) o.pass = o.pass && std::abs(r.predicted_drift - (0.08 - 0.045)) < 1e-14;
    o.detail += std::string(i ? ", " : "") + names[i] + " z " + fmt("%.2f", r.z_drift) + "/" + fmt("%.2f", r.z_vol);
  }
  return o;
}

Outcome scaling_law() {
  const ModelSpec bm = make_bm(0.1, 0.5);
  const ScalingReport r = scaling_check(bm, 0.0, 1.0, 1.0 / 8, 8, 1000000, 600, kThreads);
  std::vector<double> log_t, log_var;
  std::uint64_t seed = 700;
  for (double t : {0.25, 0.5, 1.0, 2.0, 4.0}) {
    const TimeGrid grid = TimeGrid::over(0.0, t, static_cast<std::size_t>(t * 64));
    const auto m = stream_expectations(bm, Vector::Constant(1, 0.0), grid, 100000, seed++, 2,
                                       [](const PathView& p, std::span<double> out) {
                                         out[0] = p.terminal(0);
                                         out[1] = p.terminal(0) * p.terminal(0);
                                       },
                                       kThreads);
    const double var = (m[1].mean - m[0].mean * m[0].mean) * 100000.0 / 99999.0;
    log_t.push_back(std::log(t));
    log_var.push_back(std::log(var));
  }
  const double slope = oracle::ols_slope(log_t, log_var);
  return {std::abs(r.z_variance) <= 3.0 && std::abs(slope - 1.0) <= 0.02,
          "variance z " + fmt("%.2f", r.z_variance) + ", slope " + fmt("%.4f", slope)};
}

Outcome greeks() {
  double worst = 0.0, identity = 0.0;
  for (const GridPoint& g : call_grid()) {
    const GreeksReport a = bs_greeks({kS0, g.k, kRate, g.sigma, g.t});
    const auto fd = oracle::call_greeks_fd(kS0, g.k, kRate, g.sigma, g.t);
    worst = std::max({worst, relative(a.delta, fd.delta), relative(a.kappa, fd.kappa), relative(a.gamma, fd.gamma),
                      relative(a.delta_expanded, fd.delta), relative(a.kappa_expanded, fd.kappa)});
    const double d_plus = bs_d_plus(kS0, g.k, kRate, g.sigma, g.t);
    identity = std::max(identity, std::abs(a.identity_residual) / (kS0 * norm_pdf(d_plus)));
  }
  return {worst <= 1e-6 && identity <= 1e-12,
          "max rel gap to finite differences " + fmt("%.2e", worst) + ", identity " + fmt("%.1e", identity)};
}

Outcome risk_module() {
  oracle::Uniform u(800);
  double harmonic = 0.0;
  double closest = 1e300;  // smallest random variance over the optimum, minus one
  for (int instance = 0; instance < 100; ++instance) {
    const Eigen::Index n = u.integer(1, 10);
    IndexInputs in{Vector(n), Vector(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
      in.x(i) = u(0.05, 2.0);
      in.sigma(i) = u(0.05, 0.8);
    }
    const IndexWeights w = index_weights(in);
    harmonic = std::max(harmonic, std::abs(w.variance * in.sigma.array().square().inverse().sum() - 1.0));
    for (int k = 0; k < 10000; ++k) {
      Vector share(n);
      for (Eigen::Index i = 0; i < n; ++i) share(i) = u(-1.0, 2.0);
      if (std::abs(share.sum()) < 1e-3) continue;
      share /= share.sum();
      closest = std::min(closest, portfolio_variance(share.cwiseQuotient(in.x), in.x, in.sigma) / w.variance - 1.0);
    }
  }
  double residual = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<InstrumentGreeks> inst;
    const int count = u.integer(3, 5);
    for (int i = 0; i < count; ++i) {
      const GreeksReport g = bs_greeks({kS0, u(70, 130), kRate, u(0.1, 0.4), u(0.1, 2.0)});
      inst.push_back({g.delta, g.kappa, g.gamma});
    }
    NeutralizeOptions opts;
    opts.targets = {Greek::kappa, Greek::gamma};
    const HedgeReport r = neutralize(inst, opts);
    double kappa = 0.0, gamma = 0.0, kappa_scale = 0.0, gamma_scale = 0.0;
    for (int i = 0; i < count; ++i) {
      kappa += r.alpha(i) * inst[static_cast<std::size_t>(i)].kappa;
      gamma += r.alpha(i) * inst[static_cast<std::size_t>(i)].gamma;
      kappa_scale += std::abs(r.alpha(i) * inst[static_cast<std::size_t>(i)].kappa);
      gamma_scale += std::abs(r.alpha(i) * inst[static_cast<std::size_t>(i)].gamma);
    }
    residual = std::max({residual, std::abs(kappa) / kappa_scale, std::abs(gamma) / gamma_scale});
  }
  // ties at rounding level happen for N = 1, where the only admissible weighting is the optimum
  return {harmonic <= 1e-12 && closest >= -1e-12 && residual <= 1e-10,
          "harmonic identity " + fmt("%.1e", harmonic) + ", closest random weighting " + fmt("%.1e", closest) +
              " above the optimum, neutralized residual " + fmt("%.1e", residual)};
}

Outcome martingale() {
  const DiscountCurve curve = DiscountCurve::flat(kRate);
  const ModelSpec rn = risk_neutralize(make_gbm(0.12, 0.25), curve);
  const TimeGrid grid = TimeGrid::over(0.0, 2.0, 256);
  const auto est = stream_expectations(rn, Vector::Constant(1, kS0), grid, 1000000, 900, 8,
                                       [&grid](const PathView& p, std::span<double> out) {
                                         for (std::size_t c = 0; c < 8; ++c) {
                                           const std::size_t m = 32 * (c + 1);
                                           out[c] = std::exp(-kRate * grid.time(m)) * p(m, 0);
                                         }
                                       },
                                       kThreads);
  double worst = 0.0;
  for (const MCEstimate& e : est) worst = std::max(worst, std::abs(e.mean - kS0) / e.std_error);
  return {worst <= 3.0, "max |z| over 8 checkpoints " + fmt("%.2f", worst)};
}

Outcome deterministic_cashflows() {
  oracle::Uniform u(1000);
  double loan = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    const double x = u(1, 1e6), xr = u(0, 1.5) * x, r = u(-0.05, 0.2), dt = u(0.05, 2.0);
    const int periods = u.integer(2, 60);
    const double maturity = dt * periods;
    const double c = fixed_loan_coupon(x, xr, r, dt, maturity);
    double pv = xr * std::exp(-r * maturity);
    for (int n = 1; n < periods; ++n) pv += c * std::exp(-r * n * dt);
    loan = std::max(loan, std::abs(pv / x - 1.0));
  }
  double composition = 0.0;
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> times{0.0}, rates{u(-0.02, 0.1)};
    for (int k = 0, n = u.integer(0, 6); k < n; ++k) {
      times.push_back(times.back() + u(0.1, 2.0));
      rates.push_back(u(-0.02, 0.1));
    }
    const DiscountCurve curve(times, rates);
    double t[3] = {u(0, 5), u(0, 5), u(0, 5)};
    std::sort(t, t + 3);
    const double direct = zero_coupon_price(curve, t[0], t[2]);
    composition = std::max(
        composition, std::abs(zero_coupon_price(curve, t[0], t[1]) * zero_coupon_price(curve, t[1], t[2]) / direct - 1.0));
  }
  double mass = 0.0;
  const DiscountCurve stepped({0.0, 0.5, 1.2}, {0.02, 0.05, 0.03});
  for (const DiscountCurve& curve : {DiscountCurve::flat(0.05), stepped}) {
    for (const ModelSpec& m : {make_gbm(0.1, 0.25), make_gbm(0.0, 0.5)}) {
      const GreensFunction g = greens_function(risk_neutralize(m, curve), curve, 0.0, 100.0, 2.0, 0.02);
      for (Eigen::Index k = 0; k < g.times.size(); ++k)
        mass = std::max(mass, std::abs(g.total_mass(k) - zero_coupon_price(curve, 0.0, g.times(k))));
    }
  }
  return {loan <= 1e-12 && composition <= 1e-12 && mass <= 1e-6,
          "loan balance " + fmt("%.1e", loan) + ", zero-coupon composition " + fmt("%.1e", composition) +
              ", green mass " + fmt("%.1e", mass)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome cli_reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "stochastica_acceptance";
  fs::create_directories(dir);
  using nlohmann::json;
  const json gbm = {{"type", "gbm"}, {"params", {{"mu", 0.05}, {"sigma", 0.2}}}};
  const json curve = json::array({{{"t", 0.0}, {"r", 0.05}}});
  struct Job {
    const char* command;
    json config;
    const char* out_name;
  };
  const std::vector<Job> jobs = {
      {"simulate", {{"model", gbm}, {"s0", 100}, {"horizon", 1}, {"n_steps", 32}, {"n_paths", 2000}}, "paths.csv"},
      {"simulate",
       {{"model", {{"type", "vasicek"}, {"params", {{"a", 1.0}, {"b", 0.05}, {"sigma", 0.02}}}}},
        {"s0", 0.03},
        {"horizon", 2},
        {"n_steps", 64},
        {"n_paths", 2000}},
       "paths.bin"},
      {"price",
       {{"model", gbm},
        {"curve", curve},
        {"s0", 100},
        {"payoff", {{"kind", "call"}, {"strike", 100}, {"expiry", 1.0}}},
        {"method", "all"},
        {"numerics", {{"n_paths", 20000}}}},
       nullptr},
      {"density", {{"model", gbm}, {"s0", 100}, {"t", 1.0}}, nullptr},
      {"check", {{"n_paths", 5000}, {"strike_ratios", {0.9, 1.1}}}, nullptr},
      {"greeks", {{"s", 100}, {"k", 110}, {"r", 0.05}, {"sigma", 0.3}, {"t", 0.5}}, nullptr},
      {"index", {{"x", {0.2, 0.3, 0.5}}, {"sigma", {0.1, 0.2, 0.3}}}, nullptr},
      {"hedge", {{"option", {{"s", 100}, {"k", 95}, {"r", 0.05}, {"sigma", 0.25}, {"t", 1.0}}}}, nullptr}};
  Outcome o;
  int compared = 0;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const fs::path cfg = dir / ("config" + std::to_string(j) + ".json");
    std::ofstream(cfg) << jobs[j].config.dump();
    std::string bodies[2];
    for (int run = 0; run < 2; ++run) {
      const int threads = run == 0 ? 1 : 4;
      const fs::path stdout_file = dir / ("stdout" + std::to_string(run));
      std::string cmd = std::string("\"") + STOCHASTICA_CLI + "\" " + jobs[j].command + " --config \"" + cfg.string() +
                        "\" --seed 17 --threads " + std::to_string(threads);
      fs::path out_file;
      if (jobs[j].out_name) {
        out_file = dir / (std::to_string(run) + "_" + jobs[j].out_name);
        cmd += " --out \"" + out_file.string() + "\"";
      }
      cmd += " > \"" + stdout_file.string() + "\" 2> /dev/null";
      const int status = std::system(cmd.c_str());
      if (status != 0) {
        o.pass = false;
        o.detail = std::string(jobs[j].command) + " exited with status " + std::to_string(status);
      }
      bodies[run] = slurp(stdout_file) + (jobs[j].out_name ? slurp(out_file) : "");
    }
    if (bodies[0].empty() || bodies[0] != bodies[1]) {
      o.pass = false;
      o.detail = std::string(jobs[j].command) + " output differs between --threads 1 and 4";
    }
    ++compared;
  }
  fs::remove_all(dir);
  if (o.pass) o.detail = std::to_string(compared) + " commands byte-identical across --threads 1 and 4";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  // optional arguments select criteria by number
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"cross-method pricing agreement on the 27-point call grid", pricing_agreement},
      {"at-the-money call against independent quadrature", atm_closed_form},
      {"density solvers against closed forms, with refinement", density_fidelity},
      {"Chapman-Kolmogorov composition", chapman_kolmogorov},
      {"Ito drift and volatility for S, ln S, S^2", ito_verification},
      {"Brownian variance: step independence and linear growth in T", scaling_law},
      {"greeks against 50-digit finite differences", greeks},
      {"index weights and greek neutralization", risk_module},
      {"discounted price is a martingale", martingale},
      {"deterministic cashflow identities and Green's function mass", deterministic_cashflows},
      {"CLI output independent of --threads", cli_reproducibility}};
  int failures = 0, ran = 0;
  int id = 0;
  for (const auto& [name, run] : criteria) {
    ++id;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %d criteria passed\n", ran - failures, ran);
  return failures;
}
