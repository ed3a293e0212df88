#include "seqdispatch/varma.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <json.hpp>

#include "seqdispatch/error.hpp"

namespace seqdispatch {

namespace {

using EMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Least squares X B = Y; throws SingularDesign on rank deficiency.
EMatrix solve_ls(const EMatrix& X, const EMatrix& Y, const char* stage) {
  Eigen::ColPivHouseholderQR<EMatrix> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) {
    throw Error(ErrorCode::SingularDesign, std::string(stage) + " design has rank " + std::to_string(qr.rank()) +
                                               " < " + std::to_string(X.cols()) +
                                               " (a constant channel should be dropped)");
  }
  return qr.solve(Y);
}

double lagged(const Matrix& m, std::size_t row, std::size_t lag, std::size_t c) { return m(row - lag, c); }

}  // namespace

VarmaModel VarmaModel::zeros(std::size_t p, std::size_t q, std::size_t k) {
  VarmaModel m;
  m.ar_order = p;
  m.ma_order = q;
  m.channels = k;
  m.ar.assign(p, Matrix(k, k));
  m.ma.assign(q, Matrix(k, k));
  m.intercept = Matrix(k, 1);
  m.residual_tail = Matrix(q, k);
  return m;
}

VarmaModel varma_fit(const Matrix& y, std::size_t p, std::size_t q, VarmaFitDiagnostics* diagnostics) {
  const std::size_t T = y.rows(), k = y.cols();
  if (k == 0) throw Error(ErrorCode::InsufficientData, "series has no channels");
  if (p == 0 && q == 0) throw Error(ErrorCode::InsufficientData, "at least one of p, q must be positive");
  const std::size_t L = std::max<std::size_t>(2 * (p + q), 10);
  const std::size_t start = std::max(p, L + q);
  const std::size_t cols1 = 1 + L * k, cols2 = 1 + (p + q) * k;
  if (T <= std::max(p, q) + p * k + q * k + 10 || T < L + cols1 + 1 || T < start + cols2 + 1) {
    throw Error(ErrorCode::InsufficientData,
                "VARMA(" + std::to_string(p) + "," + std::to_string(q) + ") on " + std::to_string(k) +
                    " channels needs more than " + std::to_string(T) + " rows");
  }

  // Stage 1: long VAR(L).
  const std::size_t n1 = T - L;
  EMatrix X1(n1, cols1), Y1(n1, k);
  for (std::size_t r = 0; r < n1; ++r) {
    const std::size_t t = L + r;
    X1(r, 0) = 1.0;
    for (std::size_t l = 1; l <= L; ++l) {
      for (std::size_t c = 0; c < k; ++c) X1(r, 1 + (l - 1) * k + c) = lagged(y, t, l, c);
    }
    for (std::size_t c = 0; c < k; ++c) Y1(r, c) = y(t, c);
  }
  const EMatrix B1 = solve_ls(X1, Y1, "stage-1");
  const EMatrix E1 = Y1 - X1 * B1;
  Matrix resid(T, k);
  for (std::size_t r = 0; r < n1; ++r) {
    for (std::size_t c = 0; c < k; ++c) resid(L + r, c) = E1(r, c);
  }

  // Stage 2: y on p lags of y and q lags of the stage-1 residuals.
  const std::size_t n2 = T - start;
  EMatrix X2(n2, cols2), Y2(n2, k);
  for (std::size_t r = 0; r < n2; ++r) {
    const std::size_t t = start + r;
    X2(r, 0) = 1.0;
    for (std::size_t l = 1; l <= p; ++l) {
      for (std::size_t c = 0; c < k; ++c) X2(r, 1 + (l - 1) * k + c) = lagged(y, t, l, c);
    }
    for (std::size_t l = 1; l <= q; ++l) {
      for (std::size_t c = 0; c < k; ++c) X2(r, 1 + (p + l - 1) * k + c) = lagged(resid, t, l, c);
    }
    for (std::size_t c = 0; c < k; ++c) Y2(r, c) = y(t, c);
  }
  const EMatrix B2 = solve_ls(X2, Y2, "stage-2");

  VarmaModel m = VarmaModel::zeros(p, q, k);
  for (std::size_t c = 0; c < k; ++c) m.intercept[c] = B2(0, c);
  // B2 row (1 + (l-1)k + j), column i holds Phi_l(i, j).
  for (std::size_t l = 0; l < p; ++l) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) m.ar[l](i, j) = B2(1 + l * k + j, i);
    }
  }
  for (std::size_t l = 0; l < q; ++l) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) m.ma[l](i, j) = B2(1 + (p + l) * k + j, i);
    }
  }
  m.long_ar.assign(L, Matrix(k, k));
  m.long_intercept = Matrix(k, 1);
  for (std::size_t c = 0; c < k; ++c) m.long_intercept[c] = B1(0, c);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) m.long_ar[l](i, j) = B1(1 + l * k + j, i);
    }
  }
  const EMatrix E2 = Y2 - X2 * B2;
  for (std::size_t l = 0; l < q; ++l) {
    for (std::size_t c = 0; c < k; ++c) m.residual_tail(l, c) = E2(n2 - q + l, c);
  }
  for (const auto& mats : {&m.ar, &m.ma}) {
    for (const Matrix& a : *mats) {
      if (!a.all_finite()) throw Error(ErrorCode::SingularDesign, "non-finite VARMA coefficients");
    }
  }

  if (diagnostics != nullptr) {
    diagnostics->long_order = L;
    diagnostics->first_fitted_row = start;
    diagnostics->stage1_residuals = resid;
    diagnostics->fitted = Matrix(T, k);
    const EMatrix F = X2 * B2;
    for (std::size_t r = 0; r < n2; ++r) {
      for (std::size_t c = 0; c < k; ++c) diagnostics->fitted(start + r, c) = F(r, c);
    }
  }
  return m;
}

Matrix varma_forecast(const VarmaModel& model, const Matrix& history, std::size_t horizon,
                      const Matrix* residual_history) {
  const std::size_t p = model.ar_order, q = model.ma_order, k = model.channels;
  if (history.cols() != k) throw Error(ErrorCode::ShapeMismatch, "history channel count does not match the model");
  if (history.rows() < std::max<std::size_t>(p, 1)) {
    throw Error(ErrorCode::ShortHistory, "history has " + std::to_string(history.rows()) + " rows, need " +
                                             std::to_string(std::max<std::size_t>(p, 1)));
  }
  const std::size_t H = history.rows();
  // Extended buffers: rows [0, H) observed, [H, H + horizon) forecast.
  Matrix y(H + horizon, k), e(H + horizon, k);
  std::copy(history.data(), history.data() + history.size(), y.data());

  const auto predict = [&](std::size_t t, double* out) {
    for (std::size_t i = 0; i < k; ++i) {
      double acc = model.intercept[i];
      for (std::size_t l = 1; l <= p; ++l) {
        const double* ar = model.ar[l - 1].data() + i * k;
        for (std::size_t j = 0; j < k; ++j) acc += ar[j] * y(t - l, j);
      }
      for (std::size_t l = 1; l <= q && l <= t; ++l) {
        const double* ma = model.ma[l - 1].data() + i * k;
        for (std::size_t j = 0; j < k; ++j) acc += ma[j] * e(t - l, j);
      }
      out[i] = acc;
    }
  };

  if (q > 0) {
    if (residual_history != nullptr) {
      if (residual_history->cols() != k || residual_history->rows() < q || residual_history->rows() > H) {
        throw Error(ErrorCode::ShapeMismatch, "residual history must be [q..history rows x channels]");
      }
      const std::size_t R = residual_history->rows();
      for (std::size_t r = 0; r < R; ++r) {
        for (std::size_t c = 0; c < k; ++c) e(H - R + r, c) = (*residual_history)(r, c);
      }
    } else if (const std::size_t L = model.long_ar.size(); L > 0 && H >= L + q) {
      // Residual estimates as in the fit: one-step errors of the long VAR.
      for (std::size_t t = L; t < H; ++t) {
        for (std::size_t i = 0; i < k; ++i) {
          double acc = model.long_intercept[i];
          for (std::size_t l = 1; l <= L; ++l) {
            const double* a = model.long_ar[l - 1].data() + i * k;
            for (std::size_t j = 0; j < k; ++j) acc += a[j] * y(t - l, j);
          }
          e(t, i) = y(t, i) - acc;
        }
      }
    } else {
      std::vector<double> pred(k);
      for (std::size_t t = p; t < H; ++t) {
        predict(t, pred.data());
        for (std::size_t c = 0; c < k; ++c) e(t, c) = y(t, c) - pred[c];
      }
    }
  }

  Matrix out(horizon, k);
  for (std::size_t h = 0; h < horizon; ++h) {
    predict(H + h, y.row(H + h).data());
    std::copy(y.row(H + h).begin(), y.row(H + h).end(), out.row(h).begin());
  }
  return out;
}

std::string VarmaModel::to_json() const {
  nlohmann::json j;
  j["ar_order"] = ar_order;
  j["ma_order"] = ma_order;
  j["channels"] = channels;
  const auto mats = [](const std::vector<Matrix>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const Matrix& m : v) a.push_back(m.values());
    return a;
  };
  j["ar"] = mats(ar);
  j["ma"] = mats(ma);
  j["intercept"] = intercept.values();
  j["residual_tail"] = residual_tail.values();
  j["long_ar"] = mats(long_ar);
  j["long_intercept"] = long_intercept.values();
  return j.dump(2);
}

VarmaModel VarmaModel::from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    VarmaModel m = zeros(j.at("ar_order").get<std::size_t>(), j.at("ma_order").get<std::size_t>(),
                         j.at("channels").get<std::size_t>());
    const std::size_t k = m.channels;
    const auto load = [&](const nlohmann::json& a, std::vector<Matrix>& v) {
      if (a.size() != v.size()) throw Error(ErrorCode::ShapeMismatch, "coefficient count mismatch");
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = Matrix(k, k, a[i].get<std::vector<double>>());
    };
    load(j.at("ar"), m.ar);
    load(j.at("ma"), m.ma);
    m.intercept = Matrix(k, 1, j.at("intercept").get<std::vector<double>>());
    m.residual_tail = Matrix(m.ma_order, k, j.at("residual_tail").get<std::vector<double>>());
    if (j.contains("long_ar")) {
      m.long_ar.assign(j["long_ar"].size(), Matrix(k, k));
      load(j["long_ar"], m.long_ar);
      m.long_intercept = Matrix(k, 1, j.at("long_intercept").get<std::vector<double>>());
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("VARMA model JSON: ") + e.what());
  }
}

}  // namespace seqdispatch
