#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "stochastica/numerics.hpp"

using namespace stochastica;
using namespace stochastica::numerics;

TEST(PairwiseSum, MatchesLongDoubleAccumulation) {
  oracle::Uniform u(3);
  std::vector<double> v(100003);
  long double exact = 0;
  for (auto& x : v) {
    x = u(-1.0, 1.0) * 1e3;
    exact += x;
  }
  EXPECT_NEAR(pairwise_sum(v), static_cast<double>(exact), 1e-9);
}

TEST(PairwiseSum, EmptyIsZero) { EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0); }

TEST(Trapezoid, ExactForLinearFunctions) {
  Vector x(4);
  x << 0.0, 0.3, 1.1, 2.0;
  const Vector y = 3.0 * x.array() + 1.0;
  EXPECT_NEAR(trapezoid(x, y), 1.5 * 4.0 + 2.0, 1e-14);
  EXPECT_NEAR(trapezoid_weights(x).dot(y), trapezoid(x, y), 1e-14);
}

TEST(Tridiagonal, MatchesDenseSolve) {
  oracle::Uniform u(11);
  const Eigen::Index n = 40;
  Vector lo(n), di(n), up(n), rhs(n);
  Matrix dense = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lo(i) = u(-1, 1);
    up(i) = u(-1, 1);
    di(i) = 3.0 + u();
    rhs(i) = u(-5, 5);
    dense(i, i) = di(i);
    if (i > 0) dense(i, i - 1) = lo(i);
    if (i + 1 < n) dense(i, i + 1) = up(i);
  }
  const Vector x = solve_tridiagonal(lo, di, up, rhs);
  const Vector ref = dense.partialPivLu().solve(rhs);
  EXPECT_LT((x - ref).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Tridiagonal, ZeroPivotThrows) {
  Vector z = Vector::Zero(3), d = Vector::Zero(3), r = Vector::Ones(3);
  EXPECT_THROW(solve_tridiagonal(z, d, z, r), NumericalError);
}

TEST(InterpLinear, InterpolatesAndClamps) {
  Vector x(3), y(3);
  x << 0, 1, 3;
  y << 0, 2, 0;
  EXPECT_DOUBLE_EQ(interp_linear(x, y, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(interp_linear(x, y, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(interp_linear(x, y, -4.0), 0.0);
  EXPECT_DOUBLE_EQ(interp_linear(x, y, 9.0), 0.0);
}
