#include "seqdispatch/lstm_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "seqdispatch/error.hpp"

namespace seqdispatch {

namespace {

struct Bound {
  Var emb;
  LstmVars l1, l2;
  Var head_w, head_b;
};

Bound bind(Tape& tape, const LstmBaselineParams& p, LstmBaselineParams* g) {
  Bound b;
  b.emb = tape.parameter(p.dow_embedding, g != nullptr ? &g->dow_embedding : nullptr);
  b.l1 = tape.bind(p.layer1, g != nullptr ? &g->layer1 : nullptr);
  b.l2 = tape.bind(p.layer2, g != nullptr ? &g->layer2 : nullptr);
  b.head_w = tape.parameter(p.head_w, g != nullptr ? &g->head_w : nullptr);
  b.head_b = tape.parameter(p.head_b, g != nullptr ? &g->head_b : nullptr);
  return b;
}

void check_inputs(const LstmBaselineParams& p, const Matrix& window, int dow) {
  if (window.rows() != p.arch.history_len || window.cols() != p.arch.channels) {
    throw Error(ErrorCode::ShapeMismatch, "window shape does not match the baseline architecture");
  }
  if (dow < 0 || dow > 6) throw Error(ErrorCode::ShapeMismatch, "day of week must be in 0..6");
}

Var forward(Tape& tape, const Bound& b, const LstmBaselineParams& p, const Matrix& window, int dow) {
  const Var e = tape.row(b.emb, static_cast<std::size_t>(dow));
  std::vector<Var> inputs;
  inputs.reserve(window.rows());
  for (std::size_t t = 0; t < window.rows(); ++t) {
    inputs.push_back(tape.concat(tape.constant(Matrix::column(window.row(t))), e));
  }
  const Var zero = tape.constant(Matrix(p.arch.hidden, 1));
  const auto h1 = lstm_forward(tape, b.l1, inputs, zero, zero);
  const auto h2 = lstm_forward(tape, b.l2, h1.hidden, zero, zero);
  return tape.affine(b.head_w, h2.final.h, b.head_b);
}

}  // namespace

LstmBaselineParams LstmBaselineParams::zeros(const LstmBaselineArch& a) {
  if (a.channels == 0 || a.history_len == 0 || a.horizon_len == 0 || a.hidden == 0) {
    throw Error(ErrorCode::ShapeMismatch, "baseline architecture sizes must be positive");
  }
  LstmBaselineParams p;
  p.arch = a;
  p.dow_embedding = Matrix(7, a.embed_dim);
  p.layer1 = LstmCellParams::zeros(a.channels + a.embed_dim, a.hidden);
  p.layer2 = LstmCellParams::zeros(a.hidden, a.hidden);
  p.head_w = Matrix(a.horizon_len * a.channels, a.hidden);
  p.head_b = Matrix(a.horizon_len * a.channels, 1);
  return p;
}

LstmBaselineParams LstmBaselineParams::init(const LstmBaselineArch& a, Rng& rng) {
  LstmBaselineParams p = zeros(a);
  for (double& v : p.dow_embedding.values()) v = rng.uniform(-0.5, 0.5);
  p.layer1 = LstmCellParams::init(a.channels + a.embed_dim, a.hidden, rng);
  p.layer2 = LstmCellParams::init(a.hidden, a.hidden, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(a.hidden));
  for (double& v : p.head_w.values()) v = rng.uniform(-bound, bound);
  return p;
}

Matrix lstm_baseline_forecast_normalized(const LstmBaselineParams& p, const Matrix& window, int day_of_week) {
  check_inputs(p, window, day_of_week);
  thread_local Tape tape;
  tape.clear();
  const Bound b = bind(tape, p, nullptr);
  const Matrix& flat = tape.value(forward(tape, b, p, window, day_of_week));
  Matrix out(p.arch.horizon_len, p.arch.channels);
  std::copy(flat.data(), flat.data() + flat.size(), out.data());
  return out;
}

Matrix lstm_baseline_forecast_watts(const LstmBaselineParams& p, const Matrix& window, int day_of_week) {
  return denormalize_forecast(p.normalization, lstm_baseline_forecast_normalized(p, window, day_of_week));
}

Var lstm_baseline_window_loss(Tape& tape, const LstmBaselineParams& p, LstmBaselineParams* grads,
                              const Matrix& window, int day_of_week, const Matrix& target) {
  check_inputs(p, window, day_of_week);
  if (target.rows() != p.arch.horizon_len || target.cols() != p.arch.channels) {
    throw Error(ErrorCode::ShapeMismatch, "target shape does not match the baseline architecture");
  }
  const Bound b = bind(tape, p, grads);
  const Var y = forward(tape, b, p, window, day_of_week);
  Matrix flat(target.size(), 1);
  std::copy(target.data(), target.data() + target.size(), flat.data());
  return tape.squared_error(y, flat, 1.0 / static_cast<double>(target.size()));
}

Matrix denormalize_forecast(const NormalizationParams& norm, const Matrix& normalized) {
  Matrix out = normalized;
  const bool has_norm = norm.num_channels() == normalized.cols();
  for (std::size_t t = 0; t < out.rows(); ++t) {
    for (std::size_t c = 0; c < out.cols(); ++c) {
      const double w = has_norm ? norm.denormalize(c, normalized(t, c)) : normalized(t, c);
      out(t, c) = std::max(w, 0.0);
    }
  }
  return out;
}

}  // namespace seqdispatch
