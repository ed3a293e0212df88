#include "seqdispatch/lstm.hpp"

#include <cmath>
#include <string>

#include "seqdispatch/error.hpp"

namespace seqdispatch {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

namespace detail {

void lstm_cell_kernel(const Matrix& w_i, const Matrix& w_f, const Matrix& w_o, const Matrix& w_g,
                      const Matrix& u_i, const Matrix& u_f, const Matrix& u_o, const Matrix& u_g,
                      const Matrix& b_i, const Matrix& b_f, const Matrix& b_o, const Matrix& b_g,
                      const double* x, const double* h_prev, const double* c_prev, double* h_out,
                      double* c_out, double* gates) {
  const std::size_t H = b_i.size();
  const std::size_t I = w_i.cols();
  const Matrix* W[4] = {&w_i, &w_f, &w_o, &w_g};
  const Matrix* U[4] = {&u_i, &u_f, &u_o, &u_g};
  const Matrix* B[4] = {&b_i, &b_f, &b_o, &b_g};
  for (std::size_t k = 0; k < 4; ++k) {
    double* out = gates + k * H;
    for (std::size_t j = 0; j < H; ++j) {
      const double* wr = W[k]->data() + j * I;
      const double* ur = U[k]->data() + j * H;
      double acc = (*B[k])[j];
      for (std::size_t q = 0; q < I; ++q) acc += wr[q] * x[q];
      for (std::size_t q = 0; q < H; ++q) acc += ur[q] * h_prev[q];
      out[j] = k == 3 ? std::tanh(acc) : sigmoid(acc);
    }
  }
  const double* gi = gates;
  const double* gf = gates + H;
  const double* go = gates + 2 * H;
  const double* gg = gates + 3 * H;
  double* tc = gates + 4 * H;
  for (std::size_t j = 0; j < H; ++j) {
    const double c = gf[j] * c_prev[j] + gi[j] * gg[j];
    c_out[j] = c;
    tc[j] = std::tanh(c);
    h_out[j] = go[j] * tc[j];
  }
}

}  // namespace detail

LstmCellParams LstmCellParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  LstmCellParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  for (Matrix* w : {&p.w_i, &p.w_f, &p.w_o, &p.w_g}) *w = Matrix(hidden_dim, input_dim);
  for (Matrix* u : {&p.u_i, &p.u_f, &p.u_o, &p.u_g}) *u = Matrix(hidden_dim, hidden_dim);
  for (Matrix* b : {&p.b_i, &p.b_f, &p.b_o, &p.b_g}) *b = Matrix(hidden_dim, 1);
  return p;
}

LstmCellParams LstmCellParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LstmCellParams p = zeros(input_dim, hidden_dim);
  const double wb = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(input_dim, 1)));
  const double ub = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(hidden_dim, 1)));
  for (Matrix* w : {&p.w_i, &p.w_f, &p.w_o, &p.w_g}) *w = uniform_matrix(hidden_dim, input_dim, wb, rng);
  for (Matrix* u : {&p.u_i, &p.u_f, &p.u_o, &p.u_g}) *u = uniform_matrix(hidden_dim, hidden_dim, ub, rng);
  p.b_f.fill(1.0);
  return p;
}

BiLstmParams BiLstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  return {LstmCellParams::zeros(input_dim, hidden_dim), LstmCellParams::zeros(input_dim, hidden_dim)};
}

BiLstmParams BiLstmParams::init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  BiLstmParams p;
  p.forward = LstmCellParams::init(input_dim, hidden_dim, rng);
  p.backward = LstmCellParams::init(input_dim, hidden_dim, rng);
  return p;
}

LstmState lstm_cell_step(const LstmCellParams& p, const Matrix& x, const Matrix& h_prev, const Matrix& c_prev) {
  const std::size_t H = p.hidden_dim;
  if (x.size() != p.input_dim || h_prev.size() != H || c_prev.size() != H || p.b_i.size() != H ||
      p.w_i.cols() != p.input_dim) {
    throw Error(ErrorCode::DimensionMismatch,
                "lstm_cell_step: x has " + std::to_string(x.size()) + " (expected " +
                    std::to_string(p.input_dim) + "), state has " + std::to_string(h_prev.size()) +
                    " (expected " + std::to_string(H) + ")");
  }
  LstmState out{Matrix(H, 1), Matrix(H, 1)};
  std::vector<double> gates(5 * H);
  detail::lstm_cell_kernel(p.w_i, p.w_f, p.w_o, p.w_g, p.u_i, p.u_f, p.u_o, p.u_g, p.b_i, p.b_f, p.b_o, p.b_g,
                           x.data(), h_prev.data(), c_prev.data(), out.h.data(), out.c.data(), gates.data());
  return out;
}

LstmSequenceOutput lstm_forward(const LstmCellParams& p, const Matrix& sequence, const Matrix& h0,
                                const Matrix& c0) {
  const std::size_t T = sequence.rows();
  if (T == 0) throw Error(ErrorCode::EmptySequence, "lstm_forward over an empty sequence");
  if (sequence.cols() != p.input_dim) {
    throw Error(ErrorCode::DimensionMismatch, "sequence width " + std::to_string(sequence.cols()) +
                                                  " != input_dim " + std::to_string(p.input_dim));
  }
  LstmSequenceOutput out;
  out.hidden = Matrix(T, p.hidden_dim);
  LstmState state{h0, c0};
  for (std::size_t t = 0; t < T; ++t) {
    const auto r = sequence.row(t);
    state = lstm_cell_step(p, Matrix::column(r), state.h, state.c);
    std::copy(state.h.data(), state.h.data() + p.hidden_dim, out.hidden.row(t).data());
  }
  out.final = std::move(state);
  return out;
}

BiLstmOutput bilstm_forward(const BiLstmParams& p, const Matrix& sequence) {
  const std::size_t T = sequence.rows();
  if (T == 0) throw Error(ErrorCode::EmptySequence, "bilstm_forward over an empty sequence");
  const std::size_t H = p.forward.hidden_dim;
  if (p.backward.hidden_dim != H || p.backward.input_dim != p.forward.input_dim) {
    throw Error(ErrorCode::DimensionMismatch, "bi-LSTM directions disagree on shape");
  }
  Matrix reversed(T, sequence.cols());
  for (std::size_t t = 0; t < T; ++t) {
    std::copy(sequence.row(T - 1 - t).begin(), sequence.row(T - 1 - t).end(), reversed.row(t).begin());
  }
  const Matrix zero(H, 1);
  const auto fwd = lstm_forward(p.forward, sequence, zero, zero);
  const auto bwd = lstm_forward(p.backward, reversed, zero, zero);

  BiLstmOutput out;
  out.states = Matrix(T, 2 * H);
  for (std::size_t t = 0; t < T; ++t) {
    auto dst = out.states.row(t);
    std::copy(fwd.hidden.row(t).begin(), fwd.hidden.row(t).end(), dst.begin());
    std::copy(bwd.hidden.row(T - 1 - t).begin(), bwd.hidden.row(T - 1 - t).end(),
              dst.begin() + static_cast<std::ptrdiff_t>(H));
  }
  out.summary = Matrix(2 * H, 1);
  std::copy(fwd.final.h.data(), fwd.final.h.data() + H, out.summary.data());
  std::copy(bwd.final.h.data(), bwd.final.h.data() + H, out.summary.data() + H);
  return out;
}

TapeSequence lstm_forward(Tape& tape, const LstmVars& p, std::span<const Var> inputs, Var h0, Var c0) {
  if (inputs.empty()) throw Error(ErrorCode::EmptySequence, "lstm_forward over an empty sequence");
  TapeSequence out;
  out.hidden.reserve(inputs.size());
  LstmStepVars state{h0, c0};
  for (Var x : inputs) {
    state = tape.lstm_cell(p, x, state.h, state.c);
    out.hidden.push_back(state.h);
  }
  out.final = state;
  return out;
}

TapeBiLstm bilstm_forward(Tape& tape, const LstmVars& fwd, const LstmVars& bwd, std::span<const Var> inputs) {
  if (inputs.empty()) throw Error(ErrorCode::EmptySequence, "bilstm_forward over an empty sequence");
  const Var zero_f = tape.constant(Matrix(fwd.hidden_dim, 1));
  const Var zero_b = tape.constant(Matrix(bwd.hidden_dim, 1));
  const auto f = lstm_forward(tape, fwd, inputs, zero_f, zero_f);
  std::vector<Var> reversed(inputs.rbegin(), inputs.rend());
  const auto b = lstm_forward(tape, bwd, reversed, zero_b, zero_b);
  return {tape.concat(f.final.h, b.final.h)};
}

}  // namespace seqdispatch
