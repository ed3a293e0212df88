#include "seqdispatch/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "seqdispatch/error.hpp"
#include "seqdispatch/lstm_baseline.hpp"

namespace seqdispatch {

namespace {

Matrix uniform_matrix(std::size_t rows, std::size_t cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.uniform(-bound, bound);
  return m;
}

double fan_in_bound(std::size_t fan_in) { return 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1))); }

struct Bound {
  LstmVars enc_f, enc_b, dec, gen;
  Var emb;
  Var dec_h_w, dec_h_b, dec_c_w, dec_c_b;
  Var gen_h_w, gen_h_b, gen_c_w, gen_c_b;
  Var dec_start, recon_w, recon_b, type_w, type_b;
  Var forecast_w, forecast_b;
};

Bound bind(Tape& tape, const Seq2SeqParams& p, Seq2SeqParams* g) {
  auto par = [&](const Matrix& m, Matrix Seq2SeqParams::*field) {
    return tape.parameter(m, g != nullptr ? &(g->*field) : nullptr);
  };
  Bound b;
  b.enc_f = tape.bind(p.encoder.forward, g != nullptr ? &g->encoder.forward : nullptr);
  b.enc_b = tape.bind(p.encoder.backward, g != nullptr ? &g->encoder.backward : nullptr);
  b.dec = tape.bind(p.decoder, g != nullptr ? &g->decoder : nullptr);
  b.gen = tape.bind(p.generator, g != nullptr ? &g->generator : nullptr);
  b.emb = par(p.dow_embedding, &Seq2SeqParams::dow_embedding);
  b.dec_h_w = par(p.dec_h_w, &Seq2SeqParams::dec_h_w);
  b.dec_h_b = par(p.dec_h_b, &Seq2SeqParams::dec_h_b);
  b.dec_c_w = par(p.dec_c_w, &Seq2SeqParams::dec_c_w);
  b.dec_c_b = par(p.dec_c_b, &Seq2SeqParams::dec_c_b);
  b.gen_h_w = par(p.gen_h_w, &Seq2SeqParams::gen_h_w);
  b.gen_h_b = par(p.gen_h_b, &Seq2SeqParams::gen_h_b);
  b.gen_c_w = par(p.gen_c_w, &Seq2SeqParams::gen_c_w);
  b.gen_c_b = par(p.gen_c_b, &Seq2SeqParams::gen_c_b);
  b.dec_start = par(p.dec_start, &Seq2SeqParams::dec_start);
  b.recon_w = par(p.recon_w, &Seq2SeqParams::recon_w);
  b.recon_b = par(p.recon_b, &Seq2SeqParams::recon_b);
  b.type_w = par(p.type_w, &Seq2SeqParams::type_w);
  b.type_b = par(p.type_b, &Seq2SeqParams::type_b);
  b.forecast_w = par(p.forecast_w, &Seq2SeqParams::forecast_w);
  b.forecast_b = par(p.forecast_b, &Seq2SeqParams::forecast_b);
  return b;
}

void check_window(const Seq2SeqParams& p, const Matrix& window) {
  if (window.rows() != p.arch.history_len || window.cols() != p.arch.channels) {
    throw Error(ErrorCode::ShapeMismatch,
                "window is " + std::to_string(window.rows()) + "x" + std::to_string(window.cols()) +
                    ", model expects " + std::to_string(p.arch.history_len) + "x" +
                    std::to_string(p.arch.channels));
  }
}

void check_dow(int dow) {
  if (dow < 0 || dow > 6) throw Error(ErrorCode::ShapeMismatch, "day of week must be in 0..6");
}

std::vector<Var> window_rows(Tape& tape, const Matrix& window) {
  std::vector<Var> rows;
  rows.reserve(window.rows());
  for (std::size_t t = 0; t < window.rows(); ++t) rows.push_back(tape.constant(Matrix::column(window.row(t))));
  return rows;
}

struct TapeEncoded {
  Var summary, z;
  LstmStepVars dec, gen;
};

TapeEncoded encode_tape(Tape& tape, const Bound& b, std::span<const Var> rows, int dow) {
  TapeEncoded e;
  e.summary = bilstm_forward(tape, b.enc_f, b.enc_b, rows).summary;
  e.z = tape.concat(e.summary, tape.row(b.emb, static_cast<std::size_t>(dow)));
  e.dec.h = tape.tanh(tape.affine(b.dec_h_w, e.z, b.dec_h_b));
  e.dec.c = tape.affine(b.dec_c_w, e.z, b.dec_c_b);
  e.gen.h = tape.tanh(tape.affine(b.gen_h_w, e.z, b.gen_h_b));
  e.gen.c = tape.affine(b.gen_c_w, e.z, b.gen_c_b);
  return e;
}

struct TapeDecoded {
  std::vector<Var> recon;   // recon[t] targets rows[n-1-t]
  std::vector<Var> logits;  // one per channel stream
};

TapeDecoded decode_tape(Tape& tape, const Bound& b, LstmStepVars init, std::span<const Var> rows,
                        std::size_t channels, bool teacher_forcing) {
  const std::size_t n = rows.size();
  TapeDecoded d;
  d.recon.reserve(n);
  LstmStepVars s = init;
  Var input = b.dec_start;
  for (std::size_t t = 0; t < n; ++t) {
    s = tape.lstm_cell(b.dec, input, s.h, s.c);
    const Var out = tape.affine(b.recon_w, s.h, b.recon_b);
    d.recon.push_back(out);
    input = teacher_forcing ? rows[n - 1 - t] : out;
  }
  for (std::size_t j = 0; j < channels; ++j) {
    const Var stream = tape.gather(d.recon, j);
    d.logits.push_back(tape.affine(b.type_w, stream, b.type_b));
  }
  return d;
}

std::vector<Var> generate_tape(Tape& tape, const Bound& b, LstmStepVars init, Var last_row, std::size_t horizon) {
  std::vector<Var> out;
  out.reserve(horizon);
  LstmStepVars s = init;
  Var input = last_row;
  for (std::size_t t = 0; t < horizon; ++t) {
    s = tape.lstm_cell(b.gen, input, s.h, s.c);
    const Var y = tape.affine(b.forecast_w, s.h, b.forecast_b);
    out.push_back(y);
    input = y;
  }
  return out;
}

Matrix stack_rows(const Tape& tape, std::span<const Var> vars, std::size_t width) {
  Matrix m(vars.size(), width);
  for (std::size_t t = 0; t < vars.size(); ++t) {
    const Matrix& v = tape.value(vars[t]);
    std::copy(v.data(), v.data() + width, m.row(t).data());
  }
  return m;
}

}  // namespace

Seq2SeqParams Seq2SeqParams::zeros(const Seq2SeqArch& a) {
  if (a.channels == 0 || a.history_len == 0 || a.horizon_len == 0 || a.encoder_hidden == 0 ||
      a.decoder_hidden == 0) {
    throw Error(ErrorCode::ShapeMismatch, "seq2seq architecture sizes must be positive");
  }
  Seq2SeqParams p;
  p.arch = a;
  const std::size_t k = a.channels, He = a.encoder_hidden, Hd = a.decoder_hidden, Z = a.summary_dim();
  p.encoder = BiLstmParams::zeros(k, He);
  p.dow_embedding = Matrix(7, a.embed_dim);
  for (Matrix* w : {&p.dec_h_w, &p.dec_c_w, &p.gen_h_w, &p.gen_c_w}) *w = Matrix(Hd, Z);
  for (Matrix* b : {&p.dec_h_b, &p.dec_c_b, &p.gen_h_b, &p.gen_c_b}) *b = Matrix(Hd, 1);
  p.decoder = LstmCellParams::zeros(k, Hd);
  p.dec_start = Matrix(k, 1);
  p.recon_w = Matrix(k, Hd);
  p.recon_b = Matrix(k, 1);
  p.type_w = Matrix(k, a.history_len);
  p.type_b = Matrix(k, 1);
  p.generator = LstmCellParams::zeros(k, Hd);
  p.forecast_w = Matrix(k, Hd);
  p.forecast_b = Matrix(k, 1);
  return p;
}

Seq2SeqParams Seq2SeqParams::init(const Seq2SeqArch& a, Rng& rng) {
  Seq2SeqParams p = zeros(a);
  const std::size_t k = a.channels, He = a.encoder_hidden, Hd = a.decoder_hidden, Z = a.summary_dim();
  p.encoder = BiLstmParams::init(k, He, rng);
  p.dow_embedding = uniform_matrix(7, a.embed_dim, 0.5, rng);
  for (Matrix* w : {&p.dec_h_w, &p.dec_c_w, &p.gen_h_w, &p.gen_c_w}) *w = uniform_matrix(Hd, Z, fan_in_bound(Z), rng);
  p.decoder = LstmCellParams::init(k, Hd, rng);
  p.recon_w = uniform_matrix(k, Hd, fan_in_bound(Hd), rng);
  p.type_w = uniform_matrix(k, a.history_len, fan_in_bound(a.history_len), rng);
  p.generator = LstmCellParams::init(k, Hd, rng);
  p.forecast_w = uniform_matrix(k, Hd, fan_in_bound(Hd), rng);
  return p;
}

EncodedState encode(const Seq2SeqParams& p, const Matrix& window, int day_of_week) {
  check_window(p, window);
  check_dow(day_of_week);
  Tape tape;
  const Bound b = bind(tape, p, nullptr);
  const auto rows = window_rows(tape, window);
  const auto e = encode_tape(tape, b, rows, day_of_week);
  return {tape.value(e.summary), tape.value(e.z), {tape.value(e.dec.h), tape.value(e.dec.c)},
          {tape.value(e.gen.h), tape.value(e.gen.c)}, tape.value(rows.back())};
}

Reconstruction decode_reconstruct(const Seq2SeqParams& p, const EncodedState& state, const Matrix& window,
                                  bool teacher_forcing) {
  check_window(p, window);
  if (state.decoder_init.h.size() != p.arch.decoder_hidden) {
    throw Error(ErrorCode::ShapeMismatch, "encoded state does not match decoder size");
  }
  Tape tape;
  const Bound b = bind(tape, p, nullptr);
  const auto rows = window_rows(tape, window);
  const LstmStepVars init{tape.constant(state.decoder_init.h), tape.constant(state.decoder_init.c)};
  const auto d = decode_tape(tape, b, init, rows, p.arch.channels, teacher_forcing);
  return {stack_rows(tape, d.recon, p.arch.channels), stack_rows(tape, d.logits, p.arch.channels)};
}

Matrix generate_forecast_normalized(const Seq2SeqParams& p, const EncodedState& state) {
  if (state.generator_init.h.size() != p.arch.decoder_hidden) {
    throw Error(ErrorCode::ShapeMismatch, "encoded state does not match generator size");
  }
  Tape tape;
  const Bound b = bind(tape, p, nullptr);
  const LstmStepVars init{tape.constant(state.generator_init.h), tape.constant(state.generator_init.c)};
  if (state.last_row.rows() != p.arch.channels) throw Error(ErrorCode::ShapeMismatch, "encoded state lacks x_n");
  const auto out = generate_tape(tape, b, init, tape.constant(state.last_row), p.arch.horizon_len);
  return stack_rows(tape, out, p.arch.channels);
}

Matrix generate_forecast(const Seq2SeqParams& p, const EncodedState& state) {
  return denormalize_forecast(p.normalization, generate_forecast_normalized(p, state));
}

Matrix forecast_normalized(const Seq2SeqParams& p, const Matrix& window, int day_of_week) {
  check_window(p, window);
  check_dow(day_of_week);
  thread_local Tape tape;
  tape.clear();
  const Bound b = bind(tape, p, nullptr);
  const auto rows = window_rows(tape, window);
  const auto e = encode_tape(tape, b, rows, day_of_week);
  const auto out = generate_tape(tape, b, e.gen, rows.back(), p.arch.horizon_len);
  return stack_rows(tape, out, p.arch.channels);
}

Matrix forecast_watts(const Seq2SeqParams& p, const Matrix& window, int day_of_week) {
  return denormalize_forecast(p.normalization, forecast_normalized(p, window, day_of_week));
}

WindowLoss seq2seq_window_loss(Tape& tape, const Seq2SeqParams& p, Seq2SeqParams* grads, const Matrix& window,
                               int day_of_week, const Matrix& target, const LossWeights& w) {
  check_window(p, window);
  check_dow(day_of_week);
  const std::size_t n = p.arch.history_len, m = p.arch.horizon_len, k = p.arch.channels;
  if (target.rows() != m || target.cols() != k) {
    throw Error(ErrorCode::ShapeMismatch, "target shape does not match model horizon/channels");
  }
  const Bound b = bind(tape, p, grads);
  const auto rows = window_rows(tape, window);
  const auto e = encode_tape(tape, b, rows, day_of_week);

  std::vector<Var> terms;
  WindowLoss out;
  if (w.recon > 0.0 || w.type > 0.0) {
    const auto d = decode_tape(tape, b, e.dec, rows, k, true);
    const double rw = w.recon / static_cast<double>(n * k);
    std::vector<Var> recon_terms;
    for (std::size_t t = 0; t < n; ++t) {
      recon_terms.push_back(tape.squared_error(d.recon[t], Matrix::column(window.row(n - 1 - t)), rw));
    }
    const Var recon = tape.sum(recon_terms);
    out.recon = w.recon > 0.0 ? tape.scalar(recon) / w.recon : 0.0;
    if (w.recon > 0.0) terms.push_back(recon);

    std::vector<Var> type_terms;
    const double tw = w.type / static_cast<double>(k);
    for (std::size_t j = 0; j < k; ++j) type_terms.push_back(tape.softmax_cross_entropy(d.logits[j], j, tw));
    const Var type = tape.sum(type_terms);
    out.type = w.type > 0.0 ? tape.scalar(type) / w.type : 0.0;
    if (w.type > 0.0) terms.push_back(type);
  }

  const auto y = generate_tape(tape, b, e.gen, rows.back(), m);
  const double fw = w.forecast / static_cast<double>(m * k);
  std::vector<Var> fc_terms;
  for (std::size_t t = 0; t < m; ++t) fc_terms.push_back(tape.squared_error(y[t], Matrix::column(target.row(t)), fw));
  const Var fc = tape.sum(fc_terms);
  out.forecast = w.forecast > 0.0 ? tape.scalar(fc) / w.forecast : 0.0;
  terms.push_back(fc);
  out.total = tape.sum(terms);
  return out;
}

Matrix persistence_predict(const Matrix& window, std::size_t horizon) {
  if (window.rows() == 0) throw Error(ErrorCode::EmptySequence, "persistence needs at least one observation");
  Matrix out(horizon, window.cols());
  const auto last = window.row(window.rows() - 1);
  for (std::size_t t = 0; t < horizon; ++t) std::copy(last.begin(), last.end(), out.row(t).begin());
  return out;
}

}  // namespace seqdispatch
