#include "stochastica/models.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "stochastica/numerics.hpp"

namespace stochastica {

ModelSpec::ModelSpec(ModelKind kind, nlohmann::json config, ScalarMap drift, ScalarMap vol)
    : kind_(kind),
      config_(std::move(config)),
      dimension_(1),
      noise_dim_(1),
      drift1_(std::move(drift)),
      vol1_(std::move(vol)) {
  drift_ = [d = drift1_](double t, const Vector& s, Vector& out) { out(0) = d(t, s(0)); };
  vol_ = [v = vol1_](double t, const Vector& s, Matrix& out) { out(0, 0) = v(t, s(0)); };
}

ModelSpec::ModelSpec(ModelKind kind, nlohmann::json config, Eigen::Index dimension,
                     Eigen::Index noise_dim, DriftMap drift, VolMap vol)
    : kind_(kind),
      config_(std::move(config)),
      dimension_(dimension),
      noise_dim_(noise_dim),
      drift_(std::move(drift)),
      vol_(std::move(vol)) {
  if (dimension_ < 1 || noise_dim_ < 1) throw ValidationError("model: dimension and noise_dim must be positive");
}

std::uint64_t ModelSpec::hash() const { return fnv1a(config_.dump()); }

Vector ModelSpec::drift(double t, const Vector& s) const {
  if (s.size() != dimension_) throw ValidationError("model drift: state has wrong dimension");
  Vector out(dimension_);
  drift_(t, s, out);
  return out;
}

Matrix ModelSpec::vol(double t, const Vector& s) const {
  if (s.size() != dimension_) throw ValidationError("model vol: state has wrong dimension");
  Matrix out(dimension_, noise_dim_);
  vol_(t, s, out);
  return out;
}

CovarianceSpec::CovarianceSpec(Matrix c) : c_(std::move(c)) {
  if (c_.rows() == 0 || c_.rows() != c_.cols()) throw ValidationError("covariance: matrix must be square and non-empty");
  if (!c_.allFinite()) throw ValidationError("covariance: non-finite entry");
  const double scale = std::max(1.0, c_.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < c_.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < c_.cols(); ++j) {
      if (std::abs(c_(i, j) - c_(j, i)) > 1e-12 * scale) {
        std::ostringstream msg;
        msg << "covariance: not symmetric at (" << i << "," << j << "): " << c_(i, j) << " vs "
            << c_(j, i);
        throw ValidationError(msg.str());
      }
    }
  }
}

EigenDecomposition diagonalize_covariance(const CovarianceSpec& spec) {
  const Matrix& c = spec.matrix();
  const Matrix sym = 0.5 * (c + c.transpose());
  auto [values, vectors] = jacobi_eigen(sym);
  const Eigen::Index n = values.size();

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });

  EigenDecomposition out{Vector(n), Matrix(n, n)};
  const double max_abs = values.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < n; ++k) {
    double lambda = values(order[static_cast<std::size_t>(k)]);
    if (lambda < 0.0) {
      if (lambda < -1e-10 * max_abs) {
        std::ostringstream msg;
        msg << "covariance: indefinite, eigenvalue " << k << " = " << lambda;
        throw ValidationError(msg.str());
      }
      lambda = 0.0;
    }
    out.eigenvalues(k) = lambda;
    out.eigenvectors.col(k) = vectors.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

Matrix volatility_matrix(const Vector& z, const EigenDecomposition& eig) {
  const Eigen::Index n = eig.eigenvectors.rows();
  if (z.size() != n) throw ValidationError("volatility_matrix: vol vector length does not match covariance size");
  const double max_lambda = eig.eigenvalues.size() ? eig.eigenvalues.maxCoeff() : 0.0;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < eig.eigenvalues.size(); ++k) {
    if (eig.eigenvalues(k) > 1e-10 * max_lambda) keep.push_back(k);
  }
  if (keep.empty()) keep.push_back(0);  // all-zero correlation: one silent column
  Matrix out(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const Eigen::Index k = keep[j];
    out.col(static_cast<Eigen::Index>(j)) =
        std::sqrt(eig.eigenvalues(k)) * z.cwiseProduct(eig.eigenvectors.col(k));
  }
  return out;
}

namespace {

void require_sigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("model: sigma must be finite and >= 0");
}

}  // namespace

ModelSpec make_bm(double mu, double sigma) {
  require_sigma(sigma);
  nlohmann::json cfg = {{"type", "bm"}, {"params", {{"mu", mu}, {"sigma", sigma}}}};
  return ModelSpec(ModelKind::bm, cfg, [mu](double, double) { return mu; },
                   [sigma](double, double) { return sigma; });
}

ModelSpec make_gbm(double mu, double sigma) {
  require_sigma(sigma);
  nlohmann::json cfg = {{"type", "gbm"}, {"params", {{"mu", mu}, {"sigma", sigma}}}};
  ModelSpec m(ModelKind::gbm, cfg, [mu](double, double s) { return mu * s; },
              [sigma](double, double s) { return sigma * s; });
  m.set_price_process(true);
  return m;
}

ModelSpec make_vasicek(double a, double b, double sigma) {
  require_sigma(sigma);
  if (!(a > 0.0)) throw DomainError("vasicek: mean-reversion speed a must be > 0");
  nlohmann::json cfg = {{"type", "vasicek"}, {"params", {{"a", a}, {"b", b}, {"sigma", sigma}}}};
  return ModelSpec(ModelKind::vasicek, cfg, [a, b](double, double s) { return a * (b - s); },
                   [sigma](double, double) { return sigma; });
}

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

ModelSpec make_multi(ModelKind kind, const Vector& mu, const Vector& sigma, const CovarianceSpec& c) {
  const Eigen::Index n = mu.size();
  if (sigma.size() != n || c.size() != n) throw ValidationError("multi-asset model: mu, sigma and correlation sizes differ");
  for (Eigen::Index a = 0; a < n; ++a) require_sigma(sigma(a));
  const bool geometric = kind == ModelKind::gbm;
  nlohmann::json cfg = {{"type", geometric ? "gbm" : "bm"},
                        {"params", {{"mu", to_std(mu)}, {"sigma", to_std(sigma)}}},
                        {"correlation", matrix_json(c.matrix())}};
  const Matrix base = volatility_matrix(sigma, diagonalize_covariance(c));
  ModelSpec::DriftMap drift = [mu, geometric](double, const Vector& s, Vector& out) {
    out = geometric ? Vector(mu.cwiseProduct(s)) : mu;
  };
  ModelSpec::VolMap vol = [base, geometric](double, const Vector& s, Matrix& out) {
    out = geometric ? Matrix(s.asDiagonal() * base) : base;
  };
  ModelSpec m(kind, cfg, n, base.cols(), std::move(drift), std::move(vol));
  m.set_price_process(geometric);
  return m;
}

}  // namespace

ModelSpec make_bm(const Vector& mu, const Vector& sigma, const CovarianceSpec& c) {
  return make_multi(ModelKind::bm, mu, sigma, c);
}

ModelSpec make_gbm(const Vector& mu, const Vector& sigma, const CovarianceSpec& c) {
  return make_multi(ModelKind::gbm, mu, sigma, c);
}

ModelSpec make_correlated(nlohmann::json config, bool geometric, const Vector& mu, const Vector& sigma,
                          std::function<CovarianceSpec(double t)> correlation_at) {
  const Eigen::Index n = mu.size();
  if (sigma.size() != n) throw ValidationError("correlated model: mu and sigma sizes differ");
  ModelSpec::DriftMap drift = [mu, geometric](double, const Vector& s, Vector& out) {
    out = geometric ? Vector(mu.cwiseProduct(s)) : mu;
  };
  // Full-rank noise dimension; rank-deficient instants leave zero columns.
  ModelSpec::VolMap vol = [sigma, geometric, correlation_at, n](double t, const Vector& s, Matrix& out) {
    const Matrix z = volatility_matrix(sigma, diagonalize_covariance(correlation_at(t)));
    out.setZero(n, n);
    out.leftCols(z.cols()) = geometric ? Matrix(s.asDiagonal() * z) : z;
  };
  ModelSpec m(ModelKind::custom, std::move(config), n, n, std::move(drift), std::move(vol));
  m.set_price_process(geometric).set_time_homogeneous(false);
  return m;
}

ModelSpec make_custom_grid(const Vector& s, const Vector& drift, const Vector& vol) {
  if (s.size() < 2 || drift.size() != s.size() || vol.size() != s.size()) {
    throw ValidationError("custom-grid model: need >= 2 nodes and equal-length s, drift, vol");
  }
  for (Eigen::Index i = 1; i < s.size(); ++i) {
    if (!(s(i) > s(i - 1))) throw ValidationError("custom-grid model: s must be strictly increasing");
  }
  if (!drift.allFinite() || !vol.allFinite()) throw ValidationError("custom-grid model: non-finite coefficient");
  nlohmann::json cfg = {{"type", "custom-grid"},
                        {"params", {{"s", to_std(s)}, {"drift", to_std(drift)}, {"vol", to_std(vol)}}}};
  return ModelSpec(ModelKind::custom_grid, cfg,
                   [s, drift](double, double x) { return numerics::interp_linear(s, drift, x); },
                   [s, vol](double, double x) { return numerics::interp_linear(s, vol, x); });
}

ModelSpec log_price_model(const ModelSpec& model) {
  if (!model.is_scalar()) throw ValidationError("log_price_model: model must be one-dimensional");
  nlohmann::json cfg = {{"type", "log-price"}, {"base", model.config()}};
  auto mu = model.scalar_drift();
  auto sigma = model.scalar_vol();
  ModelSpec out(
      ModelKind::custom, cfg,
      [mu, sigma](double t, double x) {
        const double s = std::exp(x);
        const double rel_vol = sigma(t, s) / s;
        return mu(t, s) / s - 0.5 * rel_vol * rel_vol;
      },
      [sigma](double t, double x) {
        const double s = std::exp(x);
        return sigma(t, s) / s;
      });
  out.set_time_homogeneous(model.time_homogeneous());
  return out;
}

namespace {

Vector vector_param(const nlohmann::json& p, const char* key) {
  const auto& v = p.at(key);
  if (v.is_number()) return Vector::Constant(1, v.get<double>());
  std::vector<double> xs = v.get<std::vector<double>>();
  return Eigen::Map<Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

double scalar_param(const nlohmann::json& p, const char* key) {
  if (!p.contains(key)) throw ValidationError(std::string("model params: missing '") + key + "'");
  if (!p.at(key).is_number()) throw ValidationError(std::string("model params: '") + key + "' must be a number");
  return p.at(key).get<double>();
}

}  // namespace

ModelSpec model_from_json(const nlohmann::json& j) {
  if (!j.contains("type")) throw ValidationError("model: missing 'type'");
  const std::string type = j.at("type").get<std::string>();
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  try {
    if (type == "bm" || type == "gbm") {
      const bool multi = params.contains("mu") && params.at("mu").is_array();
      if (!multi && !j.contains("correlation")) {
        const double mu = scalar_param(params, "mu");
        const double sigma = scalar_param(params, "sigma");
        return type == "bm" ? make_bm(mu, sigma) : make_gbm(mu, sigma);
      }
      const Vector mu = vector_param(params, "mu");
      const Vector sigma = vector_param(params, "sigma");
      Matrix c = Matrix::Identity(mu.size(), mu.size());
      if (j.contains("correlation")) {
        const auto rows = j.at("correlation").get<std::vector<std::vector<double>>>();
        c.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].size() != rows.size()) throw ValidationError("model: correlation must be square");
          for (std::size_t k = 0; k < rows.size(); ++k) c(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
        }
      }
      return type == "bm" ? make_bm(mu, sigma, CovarianceSpec(c)) : make_gbm(mu, sigma, CovarianceSpec(c));
    }
    if (type == "vasicek") {
      return make_vasicek(scalar_param(params, "a"), scalar_param(params, "b"), scalar_param(params, "sigma"));
    }
    if (type == "custom-grid") {
      return make_custom_grid(vector_param(params, "s"), vector_param(params, "drift"), vector_param(params, "vol"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model params: ") + e.what());
  }
  throw ValidationError("model: unknown type '" + type + "'");
}

std::optional<ClosedFormParams> closed_form_params(const ModelSpec& model) {
  if (!model.is_scalar()) return std::nullopt;
  const auto& cfg = model.config();
  const std::string type = cfg.value("type", "");
  const auto& p = cfg.at("params");
  ClosedFormParams out{model.kind()};
  if (type == "bm" || type == "gbm") {
    out.mu = p.value("mu", 0.0);
    out.sigma = p.at("sigma").get<double>();
  } else if (type == "vasicek") {
    out.a = p.at("a").get<double>();
    out.b = p.at("b").get<double>();
    out.sigma = p.at("sigma").get<double>();
  } else {
    return std::nullopt;
  }
  if (cfg.contains("risk_neutral")) {
    if (type != "gbm") return std::nullopt;
    const auto& curve = cfg.at("risk_neutral").at("curve");
    if (curve.size() != 1) return std::nullopt;
    out.mu = curve.at(0).at("r").get<double>();
  }
  return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace stochastica
