#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>

#include <nlohmann/json.hpp>

#include "stochastica/core.hpp"
#include "stochastica/errors.hpp"

namespace stochastica {

enum class ModelKind { bm, gbm, vasicek, custom_grid, custom };

/// Discrete-time dynamics dS = mu(t,S) dt + sigma(t,S) sqrt(dt) xi.
///
/// drift has units of price/year, vol of price/sqrt(year). For N assets the
/// drift is an N-vector and the vol an N x K matrix acting on K independent
/// standard normal draws. One-dimensional models additionally expose scalar
/// maps so hot loops never touch heap-allocated vectors.
class ModelSpec {
 public:
  using ScalarMap = std::function<double(double t, double s)>;
  using DriftMap = std::function<void(double t, const Vector& s, Vector& out)>;
  using VolMap = std::function<void(double t, const Vector& s, Matrix& out)>;

  /// One-dimensional model from scalar maps.
  ModelSpec(ModelKind kind, nlohmann::json config, ScalarMap drift, ScalarMap vol);
  /// Multi-asset model.
  ModelSpec(ModelKind kind, nlohmann::json config, Eigen::Index dimension,
            Eigen::Index noise_dim, DriftMap drift, VolMap vol);

  Eigen::Index dimension() const { return dimension_; }
  Eigen::Index noise_dim() const { return noise_dim_; }
  ModelKind kind() const { return kind_; }
  bool is_scalar() const { return static_cast<bool>(drift1_); }

  /// Canonical description; the model hash is a digest of its serialization.
  const nlohmann::json& config() const { return config_; }
  std::uint64_t hash() const;

  /// Drift and vol are homogeneous of degree one in the price (mu = m(t) S).
  bool price_process() const { return price_process_; }
  bool time_homogeneous() const { return time_homogeneous_; }
  ModelSpec& set_price_process(bool v) { price_process_ = v; return *this; }
  ModelSpec& set_time_homogeneous(bool v) { time_homogeneous_ = v; return *this; }

  double drift(double t, double s) const { return drift1_(t, s); }
  double vol(double t, double s) const { return vol1_(t, s); }
  Vector drift(double t, const Vector& s) const;
  Matrix vol(double t, const Vector& s) const;
  void drift_into(double t, const Vector& s, Vector& out) const { drift_(t, s, out); }
  void vol_into(double t, const Vector& s, Matrix& out) const { vol_(t, s, out); }

  const ScalarMap& scalar_drift() const { return drift1_; }
  const ScalarMap& scalar_vol() const { return vol1_; }

 private:
  ModelKind kind_;
  nlohmann::json config_;
  Eigen::Index dimension_;
  Eigen::Index noise_dim_;
  ScalarMap drift1_;
  ScalarMap vol1_;
  DriftMap drift_;
  VolMap vol_;
  bool price_process_ = false;
  bool time_homogeneous_ = true;
};

/// Symmetric positive semidefinite noise correlation matrix.
class CovarianceSpec {
 public:
  explicit CovarianceSpec(Matrix c);
  const Matrix& matrix() const { return c_; }
  Eigen::Index size() const { return c_.rows(); }

 private:
  Matrix c_;
};

struct EigenDecomposition {
  Vector eigenvalues;   // descending, clamped to >= 0
  Matrix eigenvectors;  // column k pairs with eigenvalues(k)
};

/// Cyclic Jacobi rotations on a symmetric matrix. Iterates until the
/// off-diagonal Frobenius norm drops below tol * max(1, ||A||_F).
/// Returns unsorted eigenvalues and the accumulated rotation (columns are
/// eigenvectors).
template <typename Derived>
std::pair<VectorX<typename Derived::Scalar>, MatrixX<typename Derived::Scalar>> jacobi_eigen(
    const Eigen::MatrixBase<Derived>& input, typename Derived::Scalar tol = 1e-12,
    int max_sweeps = 100) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  using std::sqrt;
  MatrixX<Scalar> a = input;
  const Eigen::Index n = a.rows();
  MatrixX<Scalar> v = MatrixX<Scalar>::Identity(n, n);
  const Scalar scale = std::max(Scalar(1), a.norm());

  auto off_norm = [&] {
    Scalar s(0);
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) s += Scalar(2) * a(p, q) * a(p, q);
    return sqrt(s);
  };

  for (int sweep = 0; sweep < max_sweeps && off_norm() >= tol * scale; ++sweep) {
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (a(p, q) == Scalar(0)) continue;
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * a(p, q));
        const Scalar t = (theta >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                         (abs(theta) + sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / sqrt(t * t + Scalar(1));
        const Scalar s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  return {a.diagonal(), v};
}

/// Eigen-decomposition of the correlation matrix with eigenvalues sorted
/// descending; eigenvalues in [-1e-10 max|lambda|, 0) are clamped to 0.
EigenDecomposition diagonalize_covariance(const CovarianceSpec& c);

/// Z_{ak} = z_a sqrt(lambda_k) v_a^(k), keeping only the K columns with
/// lambda_k > 0, so that Z Z^T = diag(z) C diag(z).
Matrix volatility_matrix(const Vector& z, const EigenDecomposition& eig);

ModelSpec make_bm(double mu, double sigma);
ModelSpec make_gbm(double mu, double sigma);
ModelSpec make_vasicek(double a, double b, double sigma);

/// Correlated multi-asset Brownian motion / GBM: per-asset drift mu_a (times
/// S_a for GBM) and scalar vol sigma_a (times S_a for GBM), noise correlated
/// through C.
ModelSpec make_bm(const Vector& mu, const Vector& sigma, const CovarianceSpec& c);
ModelSpec make_gbm(const Vector& mu, const Vector& sigma, const CovarianceSpec& c);

/// Multi-asset model whose correlation matrix depends on time. The
/// decomposition is recomputed for every evaluation time.
ModelSpec make_correlated(nlohmann::json config, bool geometric, const Vector& mu,
                          const Vector& sigma,
                          std::function<CovarianceSpec(double t)> correlation_at);

/// One-dimensional model with drift and vol tabulated on a price grid and
/// interpolated linearly (flat outside the grid).
ModelSpec make_custom_grid(const Vector& s, const Vector& drift, const Vector& vol);

/// Dynamics of X = ln S for a one-dimensional price model (Ito's formula):
/// drift mu e^{-x} - sigma^2 e^{-2x} / 2, vol sigma e^{-x}.
ModelSpec log_price_model(const ModelSpec& model);

/// {"type": "bm"|"gbm"|"vasicek"|"custom-grid", "params": {...}, "correlation": [[...]]}
ModelSpec model_from_json(const nlohmann::json& j);

/// Parameters of the closed-form models, read back from their config.
struct ClosedFormParams {
  ModelKind kind;
  double mu = 0.0;     // bm, gbm (constant drift rate)
  double sigma = 0.0;  // all
  double a = 0.0;      // vasicek
  double b = 0.0;      // vasicek
};
/// Present for scalar bm/gbm/vasicek with constant parameters (including a
/// risk-neutral gbm on a flat curve).
std::optional<ClosedFormParams> closed_form_params(const ModelSpec& model);

/// 64-bit FNV-1a digest.
std::uint64_t fnv1a(const std::string& bytes);

}  // namespace stochastica
