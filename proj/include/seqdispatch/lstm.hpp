#pragma once

#include <span>
#include <string>
#include <utility>

#include "seqdispatch/matrix.hpp"
#include "seqdispatch/rng.hpp"
#include "seqdispatch/tape.hpp"

namespace seqdispatch {

/// One LSTM cell: gates i, f, o, g with input weights W [hidden x input],
/// recurrent weights U [hidden x hidden] and biases b [hidden x 1].
struct LstmCellParams {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Matrix w_i, w_f, w_o, w_g;
  Matrix u_i, u_f, u_o, u_g;
  Matrix b_i, b_f, b_o, b_g;

  static LstmCellParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  /// Uniform in +-1/sqrt(fan_in); forget-gate bias 1.0, other biases 0.
  static LstmCellParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    f(prefix + "w_i", self.w_i);
    f(prefix + "w_f", self.w_f);
    f(prefix + "w_o", self.w_o);
    f(prefix + "w_g", self.w_g);
    f(prefix + "u_i", self.u_i);
    f(prefix + "u_f", self.u_f);
    f(prefix + "u_o", self.u_o);
    f(prefix + "u_g", self.u_g);
    f(prefix + "b_i", self.b_i);
    f(prefix + "b_f", self.b_f);
    f(prefix + "b_o", self.b_o);
    f(prefix + "b_g", self.b_g);
  }
};

struct BiLstmParams {
  LstmCellParams forward;
  LstmCellParams backward;

  static BiLstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);
  static BiLstmParams init(std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    LstmCellParams::visit(self.forward, prefix + "fwd.", f);
    LstmCellParams::visit(self.backward, prefix + "bwd.", f);
  }
};

struct LstmState {
  Matrix h;  // hidden x 1
  Matrix c;  // hidden x 1
};

/// i = s(W_i x + U_i h + b_i), f, o likewise, g = tanh(...),
/// c' = f*c + i*g, h' = o*tanh(c'). Throws DimensionMismatch.
LstmState lstm_cell_step(const LstmCellParams& p, const Matrix& x, const Matrix& h_prev,
                         const Matrix& c_prev);

struct LstmSequenceOutput {
  Matrix hidden;  // [T x hidden]
  LstmState final;
};

/// `sequence` is [T x input]. Throws EmptySequence for T == 0.
LstmSequenceOutput lstm_forward(const LstmCellParams& p, const Matrix& sequence, const Matrix& h0,
                                const Matrix& c0);

struct BiLstmOutput {
  Matrix states;   // [T x 2*hidden]; row t = [forward_t, backward_{T-1-t}]
  Matrix summary;  // [2*hidden x 1] = [forward final h, backward final h]
};

/// Zero initial states in both directions; the backward cell reads the
/// time-reversed sequence.
BiLstmOutput bilstm_forward(const BiLstmParams& p, const Matrix& sequence);

/// Tape-recorded counterparts used for training.
struct TapeSequence {
  std::vector<Var> hidden;
  LstmStepVars final;
};

TapeSequence lstm_forward(Tape& tape, const LstmVars& p, std::span<const Var> inputs, Var h0, Var c0);

struct TapeBiLstm {
  Var summary;  // [2*hidden x 1]
};

TapeBiLstm bilstm_forward(Tape& tape, const LstmVars& fwd, const LstmVars& bwd, std::span<const Var> inputs);

namespace detail {

/// Fused cell kernel shared by the value-level and tape paths. `gates`
/// receives [i; f; o; g; tanh(c')] (5*hidden).
void lstm_cell_kernel(const Matrix& w_i, const Matrix& w_f, const Matrix& w_o, const Matrix& w_g,
                      const Matrix& u_i, const Matrix& u_f, const Matrix& u_o, const Matrix& u_g,
                      const Matrix& b_i, const Matrix& b_f, const Matrix& b_o, const Matrix& b_g,
                      const double* x, const double* h_prev, const double* c_prev, double* h_out,
                      double* c_out, double* gates);

}  // namespace detail

}  // namespace seqdispatch
