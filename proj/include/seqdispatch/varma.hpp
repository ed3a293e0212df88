#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "seqdispatch/matrix.hpp"

namespace seqdispatch {

/// y_t = c + sum_i Phi_i y_{t-i} + sum_j Theta_j e_{t-j} + e_t.
struct VarmaModel {
  std::size_t ar_order = 0;
  std::size_t ma_order = 0;
  std::size_t channels = 0;
  std::vector<Matrix> ar;  // Phi_1..Phi_p, [k x k]
  std::vector<Matrix> ma;  // Theta_1..Theta_q, [k x k]
  Matrix intercept;        // [k x 1]
  Matrix residual_tail;    // last q in-sample residuals, oldest first, [q x k]
  // Stage-1 long VAR; supplies residual estimates at forecast time the same
  // way it did for the stage-2 regression.
  std::vector<Matrix> long_ar;  // [k x k] each
  Matrix long_intercept;        // [k x 1]

  static VarmaModel zeros(std::size_t p, std::size_t q, std::size_t k);

  std::string to_json() const;
  static VarmaModel from_json(const std::string& text);
};

/// Stage outputs kept for inspection and testing.
struct VarmaFitDiagnostics {
  std::size_t long_order = 0;
  std::size_t first_fitted_row = 0;  // first row covered by the stage-2 regression
  Matrix stage1_residuals;           // [T x k]; rows before long_order are zero
  Matrix fitted;                     // [T x k]; stage-2 fitted values, zero before first_fitted_row
};

/// Hannan-Rissanen: a long VAR fit by least squares supplies residual
/// estimates, then y_t is regressed on p lags of y and q lags of those
/// residuals. `series` is [T x k]. Throws InsufficientData, SingularDesign.
VarmaModel varma_fit(const Matrix& series, std::size_t p, std::size_t q, VarmaFitDiagnostics* diagnostics = nullptr);

/// Iterated one-step forecasts after the last row of `history` ([>= p x k]),
/// future residuals taken as zero. Past residuals come from
/// `residual_history` (rows aligned with the end of `history`) when given,
/// else from the stored long VAR when `history` covers its order plus q rows,
/// else they are rebuilt recursively over `history`. Throws ShortHistory.
Matrix varma_forecast(const VarmaModel& model, const Matrix& history, std::size_t horizon,
                      const Matrix* residual_history = nullptr);

}  // namespace seqdispatch
