#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "stochastica/core.hpp"
#include "stochastica/errors.hpp"

namespace stochastica::numerics {

/// Pairwise (cascade) summation. The result depends only on the values and
/// their order, never on how a caller chunked the work that produced them.
template <typename Scalar>
Scalar pairwise_sum(std::span<const Scalar> v) {
  constexpr std::size_t kLeaf = 16;
  if (v.size() <= kLeaf) {
    Scalar s(0);
    for (const auto& x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double pairwise_sum(const std::vector<double>& v) {
  return pairwise_sum(std::span<const double>(v));
}

/// Trapezoid rule on an arbitrary strictly increasing abscissa.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar trapezoid(const Eigen::MatrixBase<DerivedX>& x,
                                    const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  Scalar s(0);
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    s += (x(i + 1) - x(i)) * (y(i) + y(i + 1)) / Scalar(2);
  }
  return s;
}

/// Trapezoid quadrature weights for nodes x, so that sum(w .* y) == trapezoid(x, y).
template <typename Derived>
VectorX<typename Derived::Scalar> trapezoid_weights(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.size();
  VectorX<Scalar> w = VectorX<Scalar>::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const Scalar h = x(i + 1) - x(i);
    w(i) += h / Scalar(2);
    w(i + 1) += h / Scalar(2);
  }
  return w;
}

/// Thomas algorithm for a tridiagonal system.
/// lower(i) multiplies x(i-1), diag(i) x(i), upper(i) x(i+1); lower(0) and
/// upper(n-1) are ignored.
template <typename Scalar>
VectorX<Scalar> solve_tridiagonal(const VectorX<Scalar>& lower, const VectorX<Scalar>& diag,
                                  const VectorX<Scalar>& upper, const VectorX<Scalar>& rhs) {
  const Eigen::Index n = diag.size();
  VectorX<Scalar> c(n), d(n), x(n);
  Scalar denom = diag(0);
  if (denom == Scalar(0)) throw NumericalError("tridiagonal solve: zero pivot at row 0");
  c(0) = n > 1 ? upper(0) / denom : Scalar(0);
  d(0) = rhs(0) / denom;
  for (Eigen::Index i = 1; i < n; ++i) {
    denom = diag(i) - lower(i) * c(i - 1);
    if (denom == Scalar(0)) throw NumericalError("tridiagonal solve: zero pivot");
    c(i) = i + 1 < n ? upper(i) / denom : Scalar(0);
    d(i) = (rhs(i) - lower(i) * d(i - 1)) / denom;
  }
  x(n - 1) = d(n - 1);
  for (Eigen::Index i = n - 2; i >= 0; --i) x(i) = d(i) - c(i) * x(i + 1);
  return x;
}

/// Piecewise-linear interpolation with flat extrapolation.
template <typename DerivedX, typename DerivedY>
double interp_linear(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y,
                     double at) {
  const Eigen::Index n = x.size();
  if (at <= x(0)) return y(0);
  if (at >= x(n - 1)) return y(n - 1);
  const auto* begin = x.derived().data();
  const Eigen::Index hi = std::upper_bound(begin, begin + n, at) - begin;
  const Eigen::Index lo = hi - 1;
  const double w = (at - x(lo)) / (x(hi) - x(lo));
  return (1.0 - w) * y(lo) + w * y(hi);
}

/// Uniformly spaced nodes lo, lo+h, ..., hi (n >= 2).
inline Vector linspace(double lo, double hi, Eigen::Index n) {
  return Vector::LinSpaced(n, lo, hi);
}

}  // namespace stochastica::numerics
