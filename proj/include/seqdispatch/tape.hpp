#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seqdispatch/matrix.hpp"

namespace seqdispatch {

struct LstmCellParams;

/// Handle to a value recorded on a Tape.
struct Var {
  std::uint32_t id = UINT32_MAX;
  bool valid() const noexcept { return id != UINT32_MAX; }
};

/// Tape-bound views of one LSTM cell's twelve parameter matrices.
struct LstmVars {
  Var w_i, w_f, w_o, w_g;
  Var u_i, u_f, u_o, u_g;
  Var b_i, b_f, b_o, b_g;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
};

struct LstmStepVars {
  Var h;
  Var c;
};

/// Reverse-mode recorder over a small fixed set of matrix primitives.
///
/// Nodes are appended in evaluation order, so that order is already a
/// topological sort; `backward` walks it in reverse. Parameters are bound by
/// reference and their gradients are added into caller-owned buffers when
/// `backward` finishes. `clear` keeps node storage for reuse across windows.
class Tape {
 public:
  Var constant(const Matrix& value);
  Var constant(Matrix&& value);
  /// `grad` (same shape as `value`) receives += dL/dvalue on backward; may be null.
  Var parameter(const Matrix& value, Matrix* grad);

  Var affine(Var w, Var x, Var b);  // W x + b
  Var affine(Var w, Var x);         // W x
  Var add(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var scale(Var a, double s);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var concat(Var a, Var b);
  Var slice(Var a, std::size_t offset, std::size_t length);
  /// Row `r` of a [rows x d] table as a d x 1 column (embedding lookup).
  Var row(Var table, std::size_t r);
  /// Element `index` of each vector in `seq`, stacked into a column.
  Var gather(std::span<const Var> seq, std::size_t index);
  Var sum(std::span<const Var> scalars);
  Var sum_squares(Var a);
  /// weight * sum((a - target)^2), a scalar.
  Var squared_error(Var a, const Matrix& target, double weight);
  /// -weight * log softmax(logits)[label], a scalar.
  Var softmax_cross_entropy(Var logits, std::size_t label, double weight);

  LstmVars bind(const LstmCellParams& params, LstmCellParams* grads);
  LstmStepVars lstm_cell(const LstmVars& p, Var x, Var h_prev, Var c_prev);

  const Matrix& value(Var v) const;
  double scalar(Var v) const;

  /// Reverse sweep from a 1x1 loss. Throws NonScalarLoss / NonFiniteLoss.
  void backward(Var loss);

  void clear();
  std::size_t size() const noexcept { return size_; }

 private:
  enum class Op : std::uint8_t {
    constant,
    parameter,
    affine,
    affine_nobias,
    add,
    mul,
    scale,
    sigmoid,
    tanh,
    concat,
    slice,
    row,
    gather,
    sum,
    sum_squares,
    squared_error,
    softmax_xent,
    lstm_cell,
  };

  struct Node {
    Op op = Op::constant;
    bool requires_grad = false;
    std::uint32_t a = 0, b = 0, c = 0;
    std::size_t aux = 0;
    double scalar = 0.0;
    std::uint32_t list_begin = 0, list_len = 0;
    const Matrix* ext_value = nullptr;
    Matrix* ext_grad = nullptr;
    Matrix value;
    Matrix grad;
    Matrix cache;
  };

  Node& push(Op op);
  Node& node(Var v);
  const Node& node(Var v) const;
  const Matrix& val(std::uint32_t id) const;
  bool req(std::uint32_t id) const { return nodes_[id].requires_grad; }
  void backward_node(std::uint32_t id);

  std::vector<Node> nodes_;
  std::size_t size_ = 0;
  std::vector<std::uint32_t> lists_;
};

}  // namespace seqdispatch
