#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "stochastica/density.hpp"
#include "stochastica/errors.hpp"
#include "stochastica/io.hpp"
#include "stochastica/mc.hpp"
#include "stochastica/models.hpp"
#include "stochastica/pathintegral.hpp"
#include "stochastica/portfolio.hpp"
#include "stochastica/pricing.hpp"
#include "stochastica/risk.hpp"
#include "stochastica/rng.hpp"

namespace stochastica::cli {

using nlohmann::json;

namespace {

// Typed access to a config object with field-level error messages.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where("") + "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const json& raw(const std::string& key) const {
    if (!j_.contains(key)) throw ValidationError(where(key) + "missing");
    return j_.at(key);
  }
  Fields sub(const std::string& key) const {
    static const json empty = json::object();
    return Fields(j_.contains(key) ? j_.at(key) : empty, path_.empty() ? key : path_ + "." + key);
  }

  double number(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number()) throw ValidationError(where(key) + "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(where(key) + "must be finite");
    return x;
  }
  double number(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  double positive(const std::string& key) const {
    const double x = number(key);
    if (!(x > 0.0)) throw ValidationError(where(key) + "must be > 0");
    return x;
  }
  double positive(const std::string& key, double fallback) const {
    return has(key) ? positive(key) : fallback;
  }
  double non_negative(const std::string& key) const {
    const double x = number(key);
    if (!(x >= 0.0)) throw ValidationError(where(key) + "must be >= 0");
    return x;
  }
  std::uint64_t count(const std::string& key) const {
    const json& v = raw(key);
    if (!v.is_number_integer() || v.get<long long>() <= 0)
      throw ValidationError(where(key) + "must be a positive integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t count(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? count(key) : fallback;
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    if (!j_.at(key).is_string()) throw ValidationError(where(key) + "must be a string");
    return j_.at(key).get<std::string>();
  }
  std::vector<double> numbers(const std::string& key) const {
    const json& v = raw(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ValidationError(where(key) + "must be a number or an array");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ValidationError(where(key) + "must contain numbers only");
      out.push_back(x.get<double>());
    }
    return out;
  }

  std::string where(const std::string& key) const {
    std::string p = path_;
    if (!key.empty()) p = p.empty() ? key : p + "." + key;
    return "config field '" + p + "': ";
  }

 private:
  const json& j_;
  std::string path_;
};

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

ModelSpec load_model(const Fields& f) {
  try {
    return model_from_json(f.raw("model"));
  } catch (const ValidationError& e) {
    throw ValidationError(f.where("model") + e.what());
  } catch (const DomainError& e) {
    throw ValidationError(f.where("model") + e.what());
  }
}

DiscountCurve load_curve(const Fields& f) {
  if (!f.has("curve")) return DiscountCurve::flat(0.0);
  try {
    return DiscountCurve::from_json(f.raw("curve"));
  } catch (const Error& e) {
    throw ValidationError(f.where("curve") + e.what());
  }
}

std::uint64_t seed_of(const Options& opts, const Fields& f) {
  if (opts.seed) return *opts.seed;
  if (!f.has("seed")) return 0;
  const json& v = f.raw("seed");
  if (!v.is_number_unsigned()) throw ValidationError(f.where("seed") + "must be a non-negative integer");
  return v.get<std::uint64_t>();
}

// Flattened key,value lines for the csv form of a report.
void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, std::string>>& rows) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it)
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), rows);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), rows);
  } else if (j.is_string()) {
    rows.emplace_back(prefix, j.get<std::string>());
  } else {
    rows.emplace_back(prefix, io::dump_json(j, 0));
  }
}

void emit(const json& report, Format format, std::ostream& out) {
  if (format == Format::json) {
    out << io::dump_json(report) << '\n';
    return;
  }
  std::vector<std::pair<std::string, std::string>> rows;
  flatten(report, "", rows);
  out << "key,value\n";
  for (const auto& [k, v] : rows) out << k << ',' << v << '\n';
}

// Writes to --out when given, else to the stream.
template <typename Writer>
void write_body(const Options& opts, std::ostream& out, Writer&& w) {
  if (opts.out) {
    std::ofstream file(*opts.out, std::ios::binary);
    if (!file) throw ValidationError("cannot open output file '" + *opts.out + "'");
    w(file);
    if (!file) throw ValidationError("failed writing '" + *opts.out + "'");
  } else {
    w(out);
  }
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

int cmd_simulate(const Options& opts, std::ostream& out) {
  const Fields f(opts.config, "");
  const ModelSpec model = load_model(f);
  const std::vector<double> s0v = f.numbers("s0");
  if (static_cast<Eigen::Index>(s0v.size()) != model.dimension())
    throw ValidationError(f.where("s0") + "needs " + std::to_string(model.dimension()) + " values");
  const double t0 = f.number("t0", 0.0);
  const double horizon = f.positive("horizon");
  std::size_t n_steps;
  if (f.has("n_steps")) {
    n_steps = f.count("n_steps");
  } else {
    n_steps = steps_for(0.0, horizon, f.positive("dt"));
  }
  const std::size_t n_paths = f.count("n_paths", 1000);
  const std::uint64_t seed = seed_of(opts, f);
  const TimeGrid grid = TimeGrid::over(t0, t0 + horizon, n_steps);
  const PathBatch batch = simulate_paths(model, to_vector(s0v), grid, n_paths, seed, {opts.threads});

  json assets = json::array();
  for (Eigen::Index a = 0; a < batch.dimension; ++a) {
    const MCEstimate e = expectation([a](const PathView& p) { return p.terminal(a); }, batch);
    const MCEstimate m2 = expectation(
        [a, mean = e.mean](const PathView& p) { return (p.terminal(a) - mean) * (p.terminal(a) - mean); }, batch);
    json row = {{"asset", a},
                {"terminal_mean", e.mean},
                {"std_error", e.std_error},
                {"terminal_variance", m2.mean * static_cast<double>(n_paths) / static_cast<double>(n_paths - 1)}};
    if (model.dimension() == 1) {
      if (auto exact = exact_terminal_moments(model, s0v[0], horizon)) {
        row["exact_mean"] = exact->first;
        row["exact_variance"] = exact->second;
      }
    }
    assets.push_back(row);
  }
  const json summary = {{"command", "simulate"},
                        {"model_hash", io::hex(model.hash())},
                        {"seed", seed},
                        {"n_paths", n_paths},
                        {"n_steps", n_steps},
                        {"dt", grid.dt},
                        {"t0", t0},
                        {"horizon", horizon},
                        {"assets", assets}};
  emit(summary, opts.format.value_or(Format::json), out);
  if (opts.out) {
    write_body(opts, out, [&](std::ostream& o) {
      if (ends_with(*opts.out, ".bin")) {
        io::write_paths_binary(o, batch);
      } else {
        io::write_paths_csv(o, batch);
      }
    });
  }
  return 0;
}

int cmd_density(const Options& opts, std::ostream& out) {
  const Fields f(opts.config, "");
  const ModelSpec model = load_model(f);
  if (!model.is_scalar()) throw ValidationError(f.where("model") + "density needs a one-dimensional model");
  const double s0 = f.number("s0");
  const double t0 = f.number("t0", 0.0);
  const double t = f.number("t");
  if (!(t > t0)) throw ValidationError(f.where("t") + "must exceed t0");
  std::vector<std::string> methods;
  if (f.has("methods")) {
    for (const auto& m : f.raw("methods")) methods.push_back(m.get<std::string>());
  } else {
    if (closed_form_params(model)) methods.push_back("analytic");
    methods.push_back("fokker-planck");
    methods.push_back("path-integral");
  }
  const Fields g = f.sub("grid");
  Resolution res;
  res.n_space = static_cast<Eigen::Index>(g.count("n_space", static_cast<std::uint64_t>(res.n_space)));
  res.n_steps = g.count("n_steps", res.n_steps);
  res.width_sd = g.positive("width_sd", res.width_sd);
  LatticeOptions lat;
  lat.n_space = res.n_space;
  lat.width_sd = res.width_sd;
  lat.n_steps = g.count("lattice_steps", lat.n_steps);

  // numeric grids are computed first so analytic tables can share the first one
  std::map<std::string, DensityGrid> grids;
  std::optional<AnalyticDensity> exact;
  for (const auto& m : methods) {
    if (m == "fokker-planck") {
      grids.emplace(m, forward_density(model, s0, t0, t, res));
    } else if (m == "path-integral") {
      grids.emplace(m, lattice_density(model, s0, t0, t, lat));
    } else if (m == "analytic") {
      exact = analytic_transition(model, t0, s0, t);
    } else {
      throw ValidationError(f.where("methods") + "unknown method '" + m + "'");
    }
  }
  if (exact) {
    Vector nodes;
    if (!grids.empty()) {
      nodes = grids.begin()->second.s();
    } else {
      const Coordinates c = resolve_coordinates(model, s0, Coordinates::automatic);
      const bool log = c == Coordinates::log_price;
      const ModelSpec work = log ? log_price_model(model) : model;
      nodes = default_space_grid(work, log ? std::log(s0) : s0, t0, t, res).nodes();
      if (log) nodes = nodes.array().exp().matrix();
    }
    grids.emplace("analytic", exact->on_grid(nodes, t));
  }

  json l1 = json::object();
  for (auto a = grids.begin(); a != grids.end(); ++a) {
    for (auto b = std::next(a); b != grids.end(); ++b) {
      double d;
      if (a->first == "analytic") {
        d = l1_distance(b->second, exact->function());
      } else if (b->first == "analytic") {
        d = l1_distance(a->second, exact->function());
      } else {
        d = l1_distance(a->second, b->second);
      }
      l1[a->first + "|" + b->first] = d;
    }
  }

  const Format format = opts.format.value_or(Format::csv);
  write_body(opts, out, [&](std::ostream& o) {
    if (format == Format::json) {
      json report = {{"command", "density"}, {"model_hash", io::hex(model.hash())}, {"t", t}, {"l1", l1}};
      for (const auto& [name, d] : grids) {
        report["methods"][name] = {{"mass", d.mass()}, {"s", to_json(d.s())}, {"p", to_json(d.p())}};
      }
      o << io::dump_json(report) << '\n';
      return;
    }
    bool first = true;
    for (const auto& [name, d] : grids) {
      if (!first) o << "\n\n";
      first = false;
      io::write_density_csv(o, d, model.hash(), "method=" + name);
    }
    if (!l1.empty()) o << "\n\n";
    for (auto it = l1.begin(); it != l1.end(); ++it)
      o << "# l1 " << it.key() << ' ' << io::format_double(it.value().get<double>()) << '\n';
  });
  return 0;
}

namespace {

struct PriceInputs {
  ModelSpec model;
  DiscountCurve curve;
  PayoffSpec payoff;
  double s0;
};

json price_with(const std::string& method, const PriceInputs& in, const Fields& f, const Options& opts) {
  const Fields num = f.sub("numerics");
  const double expiry = in.payoff.expiry;
  json r = {{"method", method}};
  if (method == "analytic") {
    const ModelSpec rn = risk_neutralize(in.model, in.curve);
    const auto cf = closed_form_params(rn);
    if (!cf || cf->kind != ModelKind::gbm || !in.curve.is_flat())
      throw ValidationError(f.where("method") + "analytic pricing needs a GBM model and a flat curve");
    const double rate = in.curve.rate(0.0);
    const double df = std::exp(-rate * expiry);
    double v;
    switch (in.payoff.kind) {
      case PayoffKind::call:
        v = bs_price({in.s0, in.payoff.strike, rate, cf->sigma, expiry}, OptionKind::call);
        break;
      case PayoffKind::put:
        v = bs_price({in.s0, in.payoff.strike, rate, cf->sigma, expiry}, OptionKind::put);
        break;
      case PayoffKind::constant:
        v = in.payoff.amount * df;
        break;
      case PayoffKind::forward:
        v = futures_value(in.s0, in.payoff.strike, in.curve, 0.0, expiry);
        break;
      default:
        throw ValidationError(f.where("payoff.kind") + "no closed form for this payoff");
    }
    r["value"] = v;
    r["error"] = 0.0;
    r["model_hash"] = io::hex(rn.hash());
  } else if (method == "mc") {
    const double dt = num.positive("dt", expiry / 256.0);
    const std::size_t n_paths = num.count("n_paths", 100000);
    const std::uint64_t seed = opts.seed ? *opts.seed : (num.has("seed") ? num.count("seed") : seed_of(opts, f));
    const MCPrice p = pv_mc(in.model, in.curve, in.payoff, in.s0, dt, n_paths, seed, {opts.threads});
    r["value"] = p.estimate.mean;
    r["error"] = p.estimate.std_error;
    r["n_paths"] = n_paths;
    r["n_steps"] = p.n_steps;
    r["seed"] = seed;
    r["model_hash"] = io::hex(p.model_hash);
  } else if (method == "pde") {
    if (!in.model.price_process() || !in.model.is_scalar())
      throw ValidationError(f.where("model") + "pde pricing needs a one-dimensional price process");
    const Fields g = num.sub("grid");
    PdeGrid grid;
    grid.n_space = static_cast<Eigen::Index>(g.count("n_space", static_cast<std::uint64_t>(grid.n_space)));
    grid.n_steps = g.count("n_steps", grid.n_steps);
    grid.width_sd = g.positive("width_sd", grid.width_sd);
    const ModelSpec& m = in.model;
    const PdeSolution sol =
        pv_pde(in.payoff, in.curve, [&m](double t, double s) { return std::abs(m.vol(t, s)) / s; }, in.s0, grid);
    r["value"] = sol.value;
    r["error"] = 0.0;
    r["grid"] = {{"n_space", grid.n_space}, {"n_steps", grid.n_steps}, {"width_sd", grid.width_sd}};
    r["model_hash"] = io::hex(risk_neutralize(in.model, in.curve).hash());
  } else if (method == "green") {
    const ModelSpec rn = risk_neutralize(in.model, in.curve);
    const Fields g = num.sub("grid");
    LatticeOptions lat;
    lat.n_space = static_cast<Eigen::Index>(g.count("n_space", static_cast<std::uint64_t>(lat.n_space)));
    lat.width_sd = g.positive("width_sd", lat.width_sd);
    const double dt = num.positive("green_dt", expiry / 50.0);
    const GreensFunction green = greens_function(rn, in.curve, 0.0, in.s0, expiry, dt, lat);
    const GreenPrice p = pv_green(green, in.payoff);
    r["value"] = p.value;
    r["error"] = 0.0;
    r["leakage_bound"] = p.leakage_bound;
    r["warnings"] = p.warnings;
    r["model_hash"] = io::hex(rn.hash());
  } else {
    throw ValidationError(f.where("method") + "unknown method '" + method + "'");
  }
  return r;
}

}  // namespace

int cmd_price(const Options& opts, std::ostream& out) {
  const Fields f(opts.config, "");
  PriceInputs in{load_model(f), load_curve(f), PayoffSpec::constant(1.0, 1.0), f.positive("s0")};
  try {
    in.payoff = payoff_from_json(f.raw("payoff"));
  } catch (const Error& e) {
    throw ValidationError(f.where("payoff") + e.what());
  }
  const std::string method = f.text("method", "analytic");
  json report;
  if (method == "all") {
    json results = json::object();
    for (const char* m : {"analytic", "mc", "pde", "green"}) {
      try {
        results[m] = price_with(m, in, f, opts);
      } catch (const ValidationError& e) {
        results[m] = {{"method", m}, {"skipped", e.what()}};
      }
    }
    json agreement = json::object();
    double worst = 0.0;
    for (auto a = results.begin(); a != results.end(); ++a) {
      for (auto b = std::next(a); b != results.end(); ++b) {
        if (!a.value().contains("value") || !b.value().contains("value")) continue;
        const double va = a.value()["value"].get<double>(), vb = b.value()["value"].get<double>();
        const double rel = std::abs(va - vb) / std::max(std::abs(va), std::abs(vb));
        agreement[a.key() + "|" + b.key()] = rel;
        worst = std::max(worst, rel);
      }
    }
    report = {{"command", "price"}, {"payoff", in.payoff.description}, {"results", results},
              {"agreement", agreement}, {"max_relative_deviation", worst}};
  } else {
    report = price_with(method, in, f, opts);
    report["command"] = "price";
    report["payoff"] = in.payoff.description;
  }
  write_body(opts, out, [&](std::ostream& o) { emit(report, opts.format.value_or(Format::json), o); });
  return 0;
}

namespace {

BSParams bs_params(const Fields& f) {
  BSParams p{f.positive("s"), f.positive("k"), f.number("r", 0.0), f.non_negative("sigma"), f.non_negative("t")};
  return p;
}

OptionKind option_kind(const Fields& f) {
  const std::string kind = f.text("kind", "call");
  if (kind == "call") return OptionKind::call;
  if (kind == "put") return OptionKind::put;
  throw ValidationError(f.where("kind") + "must be 'call' or 'put'");
}

json greeks_json(const BSParams& p, OptionKind kind) {
  const GreeksReport g = bs_greeks(p, kind);
  return {{"price", bs_price(p, kind)},
          {"delta", g.delta},
          {"kappa", g.kappa},
          {"gamma", g.gamma},
          {"delta_expanded", g.delta_expanded},
          {"kappa_expanded", g.kappa_expanded},
          {"identity_residual", g.identity_residual},
          {"degenerate", g.degenerate}};
}

}  // namespace

int cmd_greeks(const Options& opts, std::ostream& out) {
  const Fields f(opts.config, "");
  const BSParams p = bs_params(f);
  json report = greeks_json(p, option_kind(f));
  report["command"] = "greeks";
  write_body(opts, out, [&](std::ostream& o) { emit(report, opts.format.value_or(Format::json), o); });
  return 0;
}

int cmd_hedge(const Options& opts, std::ostream& out) {
  const Fields f(opts.config, "");
  json report;
  if (f.has("option")) {
    const Fields of = f.sub("option");
    const BSParams p = bs_params(of);
    const OptionKind kind = option_kind(of);
    const HedgeRatio fd = delta_hedge(
        [&](double s) {
          BSParams q = p;
          q.s = s;
          return bs_price(q, kind);
        },
        p.s);
    const GreeksReport g = bs_greeks(p, kind);
    report = {{"command", "hedge"},
              {"delta", g.delta},
              {"finite_difference_delta", fd.delta},
              {"warnings", fd.warnings}};
  } else {
    std::vector<InstrumentGreeks> inst;
    std::vector<double> values;
    const json& list = f.raw("instruments");
    if (!list.is_array() || list.empty()) throw ValidationError(f.where("instruments") + "must be a non-empty array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const Fields item(list[i], "instruments." + std::to_string(i));
      if (item.has("option")) {
        const Fields of = item.sub("option");
        const BSParams p = bs_params(of);
        const OptionKind kind = option_kind(of);
        const GreeksReport g = bs_greeks(p, kind);
        inst.push_back({g.delta, g.kappa, g.gamma});
        values.push_back(bs_price(p, kind));
      } else {
        inst.push_back({item.number("delta"), item.number("kappa", 0.0), item.number("gamma", 0.0)});
        values.push_back(item.number("value", 0.0));
      }
    }
    NeutralizeOptions no;
    if (f.has("targets")) {
      for (const auto& t : f.raw("targets")) {
        try {
          no.targets.push_back(greek_from_string(t.get<std::string>()));
        } catch (const Error& e) {
          throw ValidationError(f.where("targets") + e.what());
        }
      }
    }
    const std::string norm = f.text("normalization", "first");
    if (norm == "unit_value") {
      no.normalization = Normalization::unit_value;
      no.values = values;
    } else if (norm != "first") {
      throw ValidationError(f.where("normalization") + "must be 'first' or 'unit_value'");
    }
    report = neutralize(inst, no).to_json();
    report["command"] = "hedge";
  }
  write_body(opts, out, [&](std::ostream& o) { emit(report, opts.format.value_or(Format::json), o); });
  return 0;
}

int cmd_index(const Options& opts, std::ostream& out) {
  const Fields f(opts.config, "");
  const IndexWeights w = index_weights({to_vector(f.numbers("x")), to_vector(f.numbers("sigma"))});
  json riskless = json::array();
  for (auto i : w.riskless) riskless.push_back(i);
  const json report = {{"command", "index"},
                       {"weights", to_json(w.w)},
                       {"variance", w.variance},
                       {"lambda", w.lambda},
                       {"degenerate", w.degenerate},
                       {"riskless", riskless}};
  write_body(opts, out, [&](std::ostream& o) { emit(report, opts.format.value_or(Format::json), o); });
  return 0;
}

int cmd_check(const Options& opts, std::ostream& out) {
  const Fields f(opts.config, "");
  const double s0 = f.positive("s0", 100.0);
  const double rate = f.number("r", 0.05);
  const std::vector<double> strikes = f.has("strike_ratios") ? f.numbers("strike_ratios") : std::vector<double>{0.8, 1.0, 1.2};
  const std::vector<double> sigmas = f.has("sigmas") ? f.numbers("sigmas") : std::vector<double>{0.2};
  const std::vector<double> expiries = f.has("expiries") ? f.numbers("expiries") : std::vector<double>{1.0};
  const std::size_t n_paths = f.count("n_paths", 100000);
  const std::uint64_t seed = seed_of(opts, f);
  const DiscountCurve curve = DiscountCurve::flat(rate);

  json rows = json::array();
  bool all_ok = true;
  std::uint64_t case_id = 0;
  for (double kr : strikes)
    for (double sigma : sigmas)
      for (double expiry : expiries) {
        const double k = kr * s0;
        const PayoffSpec pay = PayoffSpec::call(k, expiry);
        const double bs = bs_price({s0, k, rate, sigma, expiry});
        const ModelSpec model = make_gbm(rate, sigma);
        const double pde = pv_pde(pay, curve, [sigma](double, double) { return sigma; }, s0).value;
        const double green =
            pv_green(greens_function(risk_neutralize(model, curve), curve, 0.0, s0, expiry, expiry / 50.0), pay).value;
        const MCPrice mc = pv_mc(model, curve, pay, s0, expiry / 256.0, n_paths, rng::splitmix64(seed + case_id++),
                                 {opts.threads});
        const double z = (mc.estimate.mean - bs) / mc.estimate.std_error;
        const bool ok = std::abs(pde / bs - 1.0) <= 1e-3 && std::abs(green / bs - 1.0) <= 1e-3 && std::abs(z) <= 3.0;
        all_ok = all_ok && ok;
        rows.push_back({{"strike", k},
                        {"sigma", sigma},
                        {"expiry", expiry},
                        {"analytic", bs},
                        {"pde_rel_error", pde / bs - 1.0},
                        {"green_rel_error", green / bs - 1.0},
                        {"mc_z", z},
                        {"pass", ok}});
      }
  const json report = {{"command", "check"}, {"cases", rows}, {"pass", all_ok}};
  write_body(opts, out, [&](std::ostream& o) { emit(report, opts.format.value_or(Format::json), o); });
  return all_ok ? 0 : 3;
}

}  // namespace stochastica::cli
