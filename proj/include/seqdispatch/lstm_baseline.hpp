#pragma once

#include <cstddef>
#include <string>

#include "seqdispatch/lstm.hpp"
#include "seqdispatch/matrix.hpp"
#include "seqdispatch/rng.hpp"
#include "seqdispatch/tape.hpp"
#include "seqdispatch/timeseries.hpp"

namespace seqdispatch {

struct LstmBaselineArch {
  std::size_t channels = 0;
  std::size_t history_len = 144;
  std::size_t horizon_len = 6;
  std::size_t hidden = 64;
  std::size_t embed_dim = 4;

  friend bool operator==(const LstmBaselineArch&, const LstmBaselineArch&) = default;
};

/// Two stacked LSTM layers over [x_t ; emb(day)] and a linear head that maps
/// the last hidden state of the second layer to all horizon x channels
/// outputs at once.
struct LstmBaselineParams {
  LstmBaselineArch arch;
  Matrix dow_embedding;  // [7 x embed]
  LstmCellParams layer1;
  LstmCellParams layer2;
  Matrix head_w;  // [(horizon*channels) x hidden]
  Matrix head_b;

  NormalizationParams normalization;  // not trained

  static LstmBaselineParams zeros(const LstmBaselineArch& arch);
  static LstmBaselineParams init(const LstmBaselineArch& arch, Rng& rng);

  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "dow_embedding", self.dow_embedding);
    LstmCellParams::visit(self.layer1, prefix + "layer1.", f);
    LstmCellParams::visit(self.layer2, prefix + "layer2.", f);
    f(prefix + "head_w", self.head_w);
    f(prefix + "head_b", self.head_b);
  }
};

/// Normalized [horizon x channels].
Matrix lstm_baseline_forecast_normalized(const LstmBaselineParams& p, const Matrix& window, int day_of_week);
/// Watts, clamped at 0.
Matrix lstm_baseline_forecast_watts(const LstmBaselineParams& p, const Matrix& window, int day_of_week);

/// Mean squared forecast error over horizon x channels, recorded on `tape`.
Var lstm_baseline_window_loss(Tape& tape, const LstmBaselineParams& p, LstmBaselineParams* grads,
                              const Matrix& window, int day_of_week, const Matrix& target);

/// Clamps to >= 0 after denormalizing; identity scale when `norm` is empty.
Matrix denormalize_forecast(const NormalizationParams& norm, const Matrix& normalized);

}  // namespace seqdispatch
