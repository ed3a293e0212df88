#include <doctest.h>

#include <cmath>

#include "seqdispatch/error.hpp"
#include "seqdispatch/rng.hpp"
#include "seqdispatch/varma.hpp"

using namespace seqdispatch;

namespace {

// y_t = c + A y_{t-1} + e_t + B e_{t-1}
Matrix simulate(std::size_t T, const Matrix& A, const Matrix& B, const Matrix& c, Rng& rng, double noise) {
  const std::size_t k = A.rows();
  Matrix y(T, k), e(T, k);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < k; ++i) e(t, i) = noise * rng.normal();
    for (std::size_t i = 0; i < k; ++i) {
      double v = c[i] + e(t, i);
      if (t > 0) {
        for (std::size_t j = 0; j < k; ++j) v += A(i, j) * y(t - 1, j) + B(i, j) * e(t - 1, j);
      }
      y(t, i) = v;
    }
  }
  return y;
}

// Gauss-Jordan on the normal equations, one column of Y at a time.
std::vector<double> ols(const std::vector<std::vector<double>>& X, const std::vector<double>& y) {
  const std::size_t n = X[0].size();
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t r = 0; r < X.size(); ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a[i][j] += X[r][i] * X[r][j];
      a[i][n] += X[r][i] * y[r];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t piv = i;
    for (std::size_t r = i + 1; r < n; ++r) {
      if (std::abs(a[r][i]) > std::abs(a[piv][i])) piv = r;
    }
    std::swap(a[i], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == i) continue;
      const double f = a[r][i] / a[i][i];
      for (std::size_t j = i; j <= n; ++j) a[r][j] -= f * a[i][j];
    }
  }
  std::vector<double> b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = a[i][n] / a[i][i];
  return b;
}

}  // namespace

TEST_CASE("pure VAR fit equals an independent least-squares solve") {
  Rng rng(21);
  Matrix A(2, 2), B(2, 2), c(2, 1);
  A(0, 0) = 0.5;
  A(0, 1) = 0.1;
  A(1, 0) = -0.2;
  A(1, 1) = 0.3;
  c[0] = 1.0;
  c[1] = -0.5;
  const Matrix y = simulate(400, A, B, c, rng, 0.3);
  VarmaFitDiagnostics d;
  const VarmaModel m = varma_fit(y, 2, 0, &d);
  // rows from the stage-2 start onwards
  std::vector<std::vector<double>> X;
  std::vector<double> y0, y1;
  for (std::size_t t = d.first_fitted_row; t < y.rows(); ++t) {
    X.push_back({1.0, y(t - 1, 0), y(t - 1, 1), y(t - 2, 0), y(t - 2, 1)});
    y0.push_back(y(t, 0));
    y1.push_back(y(t, 1));
  }
  const auto b0 = ols(X, y0);
  const auto b1 = ols(X, y1);
  CHECK(m.intercept[0] == doctest::Approx(b0[0]).epsilon(1e-9));
  CHECK(m.ar[0](0, 0) == doctest::Approx(b0[1]).epsilon(1e-9));
  CHECK(m.ar[0](0, 1) == doctest::Approx(b0[2]).epsilon(1e-9));
  CHECK(m.ar[1](1, 0) == doctest::Approx(b1[3]).epsilon(1e-9));
  CHECK(m.ar[1](1, 1) == doctest::Approx(b1[4]).epsilon(1e-9));
}

TEST_CASE("VARMA(1,1) recovers known coefficients") {
  Rng rng(22);
  Matrix A(2, 2), B(2, 2), c(2, 1);
  A(0, 0) = 0.6;
  A(1, 1) = 0.4;
  A(1, 0) = 0.2;
  B(0, 0) = 0.4;
  B(1, 1) = -0.3;
  const Matrix y = simulate(20000, A, B, c, rng, 1.0);
  const VarmaModel m = varma_fit(y, 1, 1);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      CHECK(m.ar[0](i, j) == doctest::Approx(A(i, j)).scale(1.0).epsilon(0.05));
      CHECK(m.ma[0](i, j) == doctest::Approx(B(i, j)).scale(1.0).epsilon(0.05));
    }
  }
}

TEST_CASE("forecast recursion") {
  VarmaModel m = VarmaModel::zeros(1, 1, 1);
  m.intercept[0] = 1.0;
  m.ar[0][0] = 0.5;
  m.ma[0][0] = 0.25;
  Matrix hist(3, 1);
  hist[0] = 2.0;
  hist[1] = 3.0;
  hist[2] = 4.0;
  Matrix resid(3, 1);
  resid[2] = 0.8;
  const Matrix f = varma_forecast(m, hist, 3, &resid);
  CHECK(f[0] == doctest::Approx(1.0 + 0.5 * 4.0 + 0.25 * 0.8));
  CHECK(f[1] == doctest::Approx(1.0 + 0.5 * f[0]));  // future residuals are zero
  CHECK(f[2] == doctest::Approx(1.0 + 0.5 * f[1]));
  CHECK_THROWS_AS(varma_forecast(m, Matrix(0, 1), 2), Error);
}

TEST_CASE("recursive residuals reproduce the in-sample fit") {
  Rng rng(23);
  Matrix A(1, 1), B(1, 1), c(1, 1);
  A[0] = 0.7;
  B[0] = 0.3;
  const Matrix y = simulate(600, A, B, c, rng, 1.0);
  VarmaFitDiagnostics d;
  const VarmaModel m = varma_fit(y, 1, 1, &d);
  const Matrix f = varma_forecast(m, y, 1);
  CHECK(std::isfinite(f[0]));
  // without explicit residuals the long VAR rebuilds the stage-1 estimates
  Matrix stage1(y.rows() - d.long_order, 1);
  for (std::size_t r = 0; r < stage1.rows(); ++r) stage1[r] = d.stage1_residuals[d.long_order + r];
  CHECK(f[0] == doctest::Approx(varma_forecast(m, y, 1, &stage1)[0]).epsilon(1e-12));
  // zero-residual history reduces to the AR part
  const Matrix zero(y.rows(), 1);
  const Matrix g = varma_forecast(m, y, 1, &zero);
  CHECK(g[0] == doctest::Approx(m.intercept[0] + m.ar[0][0] * y[y.rows() - 1]));
}

TEST_CASE("fit errors and json round trip") {
  Rng rng(24);
  CHECK_THROWS_AS(varma_fit(Matrix(15, 2), 2, 1), Error);
  Matrix flat(300, 2, 1.0);
  try {
    varma_fit(flat, 1, 0);
    FAIL("expected SingularDesign");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularDesign);
  }
  Matrix A(2, 2), B(2, 2), c(2, 1);
  A(0, 0) = 0.5;
  const VarmaModel m = varma_fit(simulate(300, A, B, c, rng, 1.0), 2, 1);
  const VarmaModel r = VarmaModel::from_json(m.to_json());
  CHECK(r.ar[1] == m.ar[1]);
  CHECK(r.ma[0] == m.ma[0]);
  CHECK(r.residual_tail == m.residual_tail);
  CHECK(r.long_ar == m.long_ar);
  CHECK(r.long_intercept == m.long_intercept);
  CHECK_THROWS_AS(VarmaModel::from_json("{"), Error);
}
