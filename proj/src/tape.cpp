#include "seqdispatch/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqdispatch/error.hpp"
#include "seqdispatch/lstm.hpp"

namespace seqdispatch {

namespace {

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

[[noreturn]] void dim_error(const char* op, const Matrix& a, const Matrix& b) {
  throw Error(ErrorCode::DimensionMismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                                "x" + std::to_string(b.cols()));
}

void ensure_grad(Matrix& grad, const Matrix& like) {
  if (!grad.same_shape(like) || grad.empty()) grad.reset(like.rows(), like.cols());
}

}  // namespace

Tape::Node& Tape::push(Op op) {
  if (size_ == nodes_.size()) nodes_.emplace_back();
  Node& n = nodes_[size_++];
  n.op = op;
  n.requires_grad = false;
  n.a = n.b = n.c = 0;
  n.aux = 0;
  n.scalar = 0.0;
  n.list_begin = n.list_len = 0;
  n.ext_value = nullptr;
  n.ext_grad = nullptr;
  return n;
}

Tape::Node& Tape::node(Var v) { return nodes_.at(v.id); }
const Tape::Node& Tape::node(Var v) const {
  if (v.id >= size_) throw Error(ErrorCode::DimensionMismatch, "stale or invalid tape variable");
  return nodes_[v.id];
}

const Matrix& Tape::val(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.ext_value != nullptr ? *n.ext_value : n.value;
}

const Matrix& Tape::value(Var v) const {
  node(v);
  return val(v.id);
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.size() != 1) throw Error(ErrorCode::NonScalarLoss, "value is not a scalar");
  return m[0];
}

void Tape::clear() {
  size_ = 0;
  lists_.clear();
}

Var Tape::constant(const Matrix& value) {
  Node& n = push(Op::constant);
  n.value = value;
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::constant(Matrix&& value) {
  Node& n = push(Op::constant);
  n.value = std::move(value);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::parameter(const Matrix& value, Matrix* grad) {
  if (grad != nullptr && !grad->same_shape(value)) dim_error("parameter grad", value, *grad);
  Node& n = push(Op::parameter);
  n.ext_value = &value;
  n.ext_grad = grad;
  n.requires_grad = grad != nullptr;
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::affine(Var w, Var x, Var b) {
  node(w), node(x), node(b);
  Node& n = push(Op::affine);
  const auto id = static_cast<std::uint32_t>(size_ - 1);
  n.a = w.id;
  n.b = x.id;
  n.c = b.id;
  const Matrix& W = val(w.id);
  const Matrix& X = val(x.id);
  const Matrix& B = val(b.id);
  if (X.cols() != 1 || W.cols() != X.rows()) dim_error("affine W*x", W, X);
  if (B.rows() != W.rows() || B.cols() != 1) dim_error("affine bias", W, B);
  n.value.reset(W.rows(), 1);
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const double* wr = W.data() + r * W.cols();
    double acc = B[r];
    for (std::size_t k = 0; k < W.cols(); ++k) acc += wr[k] * X[k];
    n.value[r] = acc;
  }
  n.requires_grad = req(w.id) || req(x.id) || req(b.id);
  return {id};
}

Var Tape::affine(Var w, Var x) {
  node(w), node(x);
  Node& n = push(Op::affine_nobias);
  const auto id = static_cast<std::uint32_t>(size_ - 1);
  n.a = w.id;
  n.b = x.id;
  const Matrix& W = val(w.id);
  const Matrix& X = val(x.id);
  if (X.cols() != 1 || W.cols() != X.rows()) dim_error("affine W*x", W, X);
  n.value.reset(W.rows(), 1);
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const double* wr = W.data() + r * W.cols();
    double acc = 0.0;
    for (std::size_t k = 0; k < W.cols(); ++k) acc += wr[k] * X[k];
    n.value[r] = acc;
  }
  n.requires_grad = req(w.id) || req(x.id);
  return {id};
}

Var Tape::add(Var a, Var b) {
  node(a), node(b);
  Node& n = push(Op::add);
  n.a = a.id;
  n.b = b.id;
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (!A.same_shape(B)) dim_error("add", A, B);
  n.value = A;
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] += B[i];
  n.requires_grad = req(a.id) || req(b.id);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::mul(Var a, Var b) {
  node(a), node(b);
  Node& n = push(Op::mul);
  n.a = a.id;
  n.b = b.id;
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (!A.same_shape(B)) dim_error("mul", A, B);
  n.value = A;
  for (std::size_t i = 0; i < A.size(); ++i) n.value[i] *= B[i];
  n.requires_grad = req(a.id) || req(b.id);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::scale(Var a, double s) {
  node(a);
  Node& n = push(Op::scale);
  n.a = a.id;
  n.scalar = s;
  n.value = val(a.id);
  for (double& v : n.value.values()) v *= s;
  n.requires_grad = req(a.id);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::sigmoid(Var a) {
  node(a);
  Node& n = push(Op::sigmoid);
  n.a = a.id;
  n.value = val(a.id);
  for (double& v : n.value.values()) v = sigmoid_scalar(v);
  n.requires_grad = req(a.id);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::tanh(Var a) {
  node(a);
  Node& n = push(Op::tanh);
  n.a = a.id;
  n.value = val(a.id);
  for (double& v : n.value.values()) v = std::tanh(v);
  n.requires_grad = req(a.id);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::concat(Var a, Var b) {
  node(a), node(b);
  Node& n = push(Op::concat);
  n.a = a.id;
  n.b = b.id;
  const Matrix& A = val(a.id);
  const Matrix& B = val(b.id);
  if (A.cols() != 1 || B.cols() != 1) dim_error("concat", A, B);
  n.value.reset(A.rows() + B.rows(), 1);
  std::copy(A.data(), A.data() + A.size(), n.value.data());
  std::copy(B.data(), B.data() + B.size(), n.value.data() + A.size());
  n.requires_grad = req(a.id) || req(b.id);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  node(a);
  Node& n = push(Op::slice);
  n.a = a.id;
  n.aux = offset;
  const Matrix& A = val(a.id);
  if (A.cols() != 1 || offset + length > A.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "slice out of range");
  }
  n.value.reset(length, 1);
  std::copy(A.data() + offset, A.data() + offset + length, n.value.data());
  n.requires_grad = req(a.id);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::row(Var table, std::size_t r) {
  node(table);
  Node& n = push(Op::row);
  n.a = table.id;
  n.aux = r;
  const Matrix& T = val(table.id);
  if (r >= T.rows()) throw Error(ErrorCode::DimensionMismatch, "row index out of range");
  n.value.reset(T.cols(), 1);
  std::copy(T.data() + r * T.cols(), T.data() + (r + 1) * T.cols(), n.value.data());
  n.requires_grad = req(table.id);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::gather(std::span<const Var> seq, std::size_t index) {
  for (Var v : seq) {
    node(v);
    if (index >= val(v.id).size()) {
      throw Error(ErrorCode::DimensionMismatch, "gather index out of range");
    }
  }
  const auto begin = static_cast<std::uint32_t>(lists_.size());
  bool any = false;
  for (Var v : seq) {
    lists_.push_back(v.id);
    any = any || req(v.id);
  }
  Node& n = push(Op::gather);
  n.list_begin = begin;
  n.list_len = static_cast<std::uint32_t>(seq.size());
  n.aux = index;
  n.value.reset(seq.size(), 1);
  for (std::size_t t = 0; t < seq.size(); ++t) n.value[t] = val(seq[t].id)[index];
  n.requires_grad = any;
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::sum(std::span<const Var> scalars) {
  const auto begin = static_cast<std::uint32_t>(lists_.size());
  bool any = false;
  double total = 0.0;
  for (Var v : scalars) {
    node(v);
    const Matrix& m = val(v.id);
    if (m.size() != 1) throw Error(ErrorCode::DimensionMismatch, "sum expects scalars");
    lists_.push_back(v.id);
    any = any || req(v.id);
    total += m[0];
  }
  Node& n = push(Op::sum);
  n.list_begin = begin;
  n.list_len = static_cast<std::uint32_t>(scalars.size());
  n.value.reset(1, 1);
  n.value[0] = total;
  n.requires_grad = any;
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::sum_squares(Var a) {
  node(a);
  Node& n = push(Op::sum_squares);
  n.a = a.id;
  double s = 0.0;
  for (double v : val(a.id).values()) s += v * v;
  n.value.reset(1, 1);
  n.value[0] = s;
  n.requires_grad = req(a.id);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::squared_error(Var a, const Matrix& target, double weight) {
  node(a);
  Node& n = push(Op::squared_error);
  n.a = a.id;
  n.scalar = weight;
  const Matrix& A = val(a.id);
  if (A.size() != target.size()) dim_error("squared_error", A, target);
  n.cache = target;
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double r = A[i] - target[i];
    s += r * r;
  }
  n.value.reset(1, 1);
  n.value[0] = weight * s;
  n.requires_grad = req(a.id);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

Var Tape::softmax_cross_entropy(Var logits, std::size_t label, double weight) {
  node(logits);
  Node& n = push(Op::softmax_xent);
  n.a = logits.id;
  n.aux = label;
  n.scalar = weight;
  const Matrix& L = val(logits.id);
  if (label >= L.size()) throw Error(ErrorCode::DimensionMismatch, "label out of range");
  const double mx = *std::max_element(L.data(), L.data() + L.size());
  n.cache.reset(L.size(), 1);
  double z = 0.0;
  for (std::size_t i = 0; i < L.size(); ++i) {
    n.cache[i] = std::exp(L[i] - mx);
    z += n.cache[i];
  }
  for (double& p : n.cache.values()) p /= z;
  n.value.reset(1, 1);
  n.value[0] = -weight * (L[label] - mx - std::log(z));
  n.requires_grad = req(logits.id);
  return {static_cast<std::uint32_t>(size_ - 1)};
}

LstmVars Tape::bind(const LstmCellParams& p, LstmCellParams* g) {
  LstmVars v;
  v.input_dim = p.input_dim;
  v.hidden_dim = p.hidden_dim;
  auto bind1 = [&](const Matrix& m, Matrix LstmCellParams::*field) {
    return parameter(m, g != nullptr ? &(g->*field) : nullptr);
  };
  v.w_i = bind1(p.w_i, &LstmCellParams::w_i);
  v.w_f = bind1(p.w_f, &LstmCellParams::w_f);
  v.w_o = bind1(p.w_o, &LstmCellParams::w_o);
  v.w_g = bind1(p.w_g, &LstmCellParams::w_g);
  v.u_i = bind1(p.u_i, &LstmCellParams::u_i);
  v.u_f = bind1(p.u_f, &LstmCellParams::u_f);
  v.u_o = bind1(p.u_o, &LstmCellParams::u_o);
  v.u_g = bind1(p.u_g, &LstmCellParams::u_g);
  v.b_i = bind1(p.b_i, &LstmCellParams::b_i);
  v.b_f = bind1(p.b_f, &LstmCellParams::b_f);
  v.b_o = bind1(p.b_o, &LstmCellParams::b_o);
  v.b_g = bind1(p.b_g, &LstmCellParams::b_g);
  return v;
}

LstmStepVars Tape::lstm_cell(const LstmVars& p, Var x, Var h_prev, Var c_prev) {
  node(x), node(h_prev), node(c_prev);
  const std::size_t H = p.hidden_dim;
  const Matrix& X = val(x.id);
  const Matrix& Hp = val(h_prev.id);
  const Matrix& Cp = val(c_prev.id);
  if (X.size() != p.input_dim || Hp.size() != H || Cp.size() != H) {
    throw Error(ErrorCode::DimensionMismatch, "lstm_cell: input " + std::to_string(X.size()) + "/" +
                                                  std::to_string(p.input_dim) + ", hidden " +
                                                  std::to_string(Hp.size()) + "/" + std::to_string(H));
  }
  const auto begin = static_cast<std::uint32_t>(lists_.size());
  for (Var v : {p.w_i, p.w_f, p.w_o, p.w_g, p.u_i, p.u_f, p.u_o, p.u_g, p.b_i, p.b_f, p.b_o, p.b_g}) {
    lists_.push_back(v.id);
  }
  bool any = req(x.id) || req(h_prev.id) || req(c_prev.id);
  for (std::uint32_t k = 0; k < 12; ++k) any = any || req(lists_[begin + k]);

  Node& n = push(Op::lstm_cell);
  n.a = x.id;
  n.b = h_prev.id;
  n.c = c_prev.id;
  n.list_begin = begin;
  n.list_len = 12;
  n.requires_grad = any;
  n.value.reset(2 * H, 1);
  n.cache.reset(5 * H, 1);
  const std::uint32_t* ids = lists_.data() + begin;
  detail::lstm_cell_kernel(val(ids[0]), val(ids[1]), val(ids[2]), val(ids[3]), val(ids[4]), val(ids[5]),
                           val(ids[6]), val(ids[7]), val(ids[8]), val(ids[9]), val(ids[10]), val(ids[11]),
                           val(x.id).data(), val(h_prev.id).data(), val(c_prev.id).data(), n.value.data(),
                           n.value.data() + H, n.cache.data());
  const Var out{static_cast<std::uint32_t>(size_ - 1)};
  return {slice(out, 0, H), slice(out, H, H)};
}

void Tape::backward(Var loss) {
  node(loss);
  const Matrix& lv = val(loss.id);
  if (lv.size() != 1) throw Error(ErrorCode::NonScalarLoss, "loss must be 1x1");
  if (!std::isfinite(lv[0])) throw Error(ErrorCode::NonFiniteLoss, "loss is not finite");

  for (std::size_t i = 0; i <= loss.id; ++i) {
    Node& n = nodes_[i];
    if (n.requires_grad) {
      ensure_grad(n.grad, val(static_cast<std::uint32_t>(i)));
      n.grad.fill(0.0);
    }
  }
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (nodes_[i].requires_grad) backward_node(static_cast<std::uint32_t>(i));
  }
}

void Tape::backward_node(std::uint32_t id) {
  Node& n = nodes_[id];
  const Matrix& g = n.grad;
  switch (n.op) {
    case Op::constant:
      break;
    case Op::parameter:
      if (n.ext_grad != nullptr) {
        for (std::size_t i = 0; i < g.size(); ++i) (*n.ext_grad)[i] += g[i];
      }
      break;
    case Op::affine:
    case Op::affine_nobias: {
      const Matrix& W = val(n.a);
      const Matrix& X = val(n.b);
      const std::size_t R = W.rows(), C = W.cols();
      if (req(n.a)) {
        Matrix& gw = nodes_[n.a].grad;
        for (std::size_t r = 0; r < R; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          double* row = gw.data() + r * C;
          for (std::size_t k = 0; k < C; ++k) row[k] += gr * X[k];
        }
      }
      if (req(n.b)) {
        Matrix& gx = nodes_[n.b].grad;
        for (std::size_t r = 0; r < R; ++r) {
          const double gr = g[r];
          const double* wr = W.data() + r * C;
          for (std::size_t k = 0; k < C; ++k) gx[k] += gr * wr[k];
        }
      }
      if (n.op == Op::affine && req(n.c)) {
        Matrix& gb = nodes_[n.c].grad;
        for (std::size_t r = 0; r < R; ++r) gb[r] += g[r];
      }
      break;
    }
    case Op::add:
      for (std::uint32_t in : {n.a, n.b}) {
        if (!req(in)) continue;
        Matrix& gi = nodes_[in].grad;
        for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
      }
      break;
    case Op::mul: {
      const Matrix& A = val(n.a);
      const Matrix& B = val(n.b);
      if (req(n.a)) {
        Matrix& ga = nodes_[n.a].grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * B[i];
      }
      if (req(n.b)) {
        Matrix& gb = nodes_[n.b].grad;
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * A[i];
      }
      break;
    }
    case Op::scale: {
      Matrix& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.scalar;
      break;
    }
    case Op::sigmoid: {
      Matrix& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.value[i] * (1.0 - n.value[i]);
      break;
    }
    case Op::tanh: {
      Matrix& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
      break;
    }
    case Op::concat: {
      const std::size_t na = val(n.a).size();
      if (req(n.a)) {
        Matrix& ga = nodes_[n.a].grad;
        for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
      }
      if (req(n.b)) {
        Matrix& gb = nodes_[n.b].grad;
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
      }
      break;
    }
    case Op::slice: {
      Matrix& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[n.aux + i] += g[i];
      break;
    }
    case Op::row: {
      Matrix& ga = nodes_[n.a].grad;
      double* dst = ga.data() + n.aux * ga.cols();
      for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
      break;
    }
    case Op::gather:
      for (std::uint32_t t = 0; t < n.list_len; ++t) {
        const std::uint32_t in = lists_[n.list_begin + t];
        if (req(in)) nodes_[in].grad[n.aux] += g[t];
      }
      break;
    case Op::sum:
      for (std::uint32_t t = 0; t < n.list_len; ++t) {
        const std::uint32_t in = lists_[n.list_begin + t];
        if (req(in)) nodes_[in].grad[0] += g[0];
      }
      break;
    case Op::sum_squares: {
      const Matrix& A = val(n.a);
      Matrix& ga = nodes_[n.a].grad;
      for (std::size_t i = 0; i < A.size(); ++i) ga[i] += 2.0 * A[i] * g[0];
      break;
    }
    case Op::squared_error: {
      const Matrix& A = val(n.a);
      Matrix& ga = nodes_[n.a].grad;
      const double s = 2.0 * n.scalar * g[0];
      for (std::size_t i = 0; i < A.size(); ++i) ga[i] += s * (A[i] - n.cache[i]);
      break;
    }
    case Op::softmax_xent: {
      Matrix& ga = nodes_[n.a].grad;
      const double s = n.scalar * g[0];
      for (std::size_t i = 0; i < ga.size(); ++i) {
        ga[i] += s * (n.cache[i] - (i == n.aux ? 1.0 : 0.0));
      }
      break;
    }
    case Op::lstm_cell: {
      const std::uint32_t* ids = lists_.data() + n.list_begin;
      const std::size_t H = n.value.size() / 2;
      const Matrix& X = val(n.a);
      const Matrix& Hp = val(n.b);
      const Matrix& Cp = val(n.c);
      const std::size_t I = X.size();
      const double* gi = n.cache.data();
      const double* gf = gi + H;
      const double* go = gf + H;
      const double* gg = go + H;
      const double* tc = gg + H;
      const double* dh = g.data();
      const double* dc_out = g.data() + H;

      // Pre-activation gradients, laid out [i; f; o; g].
      thread_local std::vector<double> da;
      da.assign(4 * H, 0.0);
      for (std::size_t j = 0; j < H; ++j) {
        const double dc = dc_out[j] + dh[j] * go[j] * (1.0 - tc[j] * tc[j]);
        const double d_o = dh[j] * tc[j];
        da[j] = dc * gg[j] * gi[j] * (1.0 - gi[j]);
        da[H + j] = dc * Cp[j] * gf[j] * (1.0 - gf[j]);
        da[2 * H + j] = d_o * go[j] * (1.0 - go[j]);
        da[3 * H + j] = dc * gi[j] * (1.0 - gg[j] * gg[j]);
        if (req(n.c)) nodes_[n.c].grad[j] += dc * gf[j];
      }
      for (std::size_t k = 0; k < 4; ++k) {
        const double* dak = da.data() + k * H;
        const std::uint32_t w_id = ids[k], u_id = ids[4 + k], b_id = ids[8 + k];
        const Matrix& W = val(w_id);
        const Matrix& U = val(u_id);
        if (req(w_id)) {
          Matrix& gw = nodes_[w_id].grad;
          for (std::size_t j = 0; j < H; ++j) {
            double* row = gw.data() + j * I;
            for (std::size_t q = 0; q < I; ++q) row[q] += dak[j] * X[q];
          }
        }
        if (req(u_id)) {
          Matrix& gu = nodes_[u_id].grad;
          for (std::size_t j = 0; j < H; ++j) {
            double* row = gu.data() + j * H;
            for (std::size_t q = 0; q < H; ++q) row[q] += dak[j] * Hp[q];
          }
        }
        if (req(b_id)) {
          Matrix& gb = nodes_[b_id].grad;
          for (std::size_t j = 0; j < H; ++j) gb[j] += dak[j];
        }
        if (req(n.a)) {
          Matrix& gx = nodes_[n.a].grad;
          for (std::size_t j = 0; j < H; ++j) {
            const double* wr = W.data() + j * I;
            for (std::size_t q = 0; q < I; ++q) gx[q] += dak[j] * wr[q];
          }
        }
        if (req(n.b)) {
          Matrix& gh = nodes_[n.b].grad;
          for (std::size_t j = 0; j < H; ++j) {
            const double* ur = U.data() + j * H;
            for (std::size_t q = 0; q < H; ++q) gh[q] += dak[j] * ur[q];
          }
        }
      }
      break;
    }
  }
}

}  // namespace seqdispatch
