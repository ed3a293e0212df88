#pragma once

#include <cstddef>
#include <string>

#include "seqdispatch/lstm.hpp"
#include "seqdispatch/matrix.hpp"
#include "seqdispatch/rng.hpp"
#include "seqdispatch/tape.hpp"
#include "seqdispatch/timeseries.hpp"

namespace seqdispatch {

struct Seq2SeqArch {
  std::size_t channels = 0;
  std::size_t history_len = 144;
  std::size_t horizon_len = 6;
  std::size_t encoder_hidden = 64;  // per direction
  std::size_t decoder_hidden = 128;  // decoder and generator
  std::size_t embed_dim = 4;

  std::size_t summary_dim() const noexcept { return 2 * encoder_hidden + embed_dim; }
  friend bool operator==(const Seq2SeqArch&, const Seq2SeqArch&) = default;
};

/// Trainable parameters of the encoder / decoder / generator network.
///
/// The bi-LSTM encoder summary (forward-final and backward-final hidden
/// states) is concatenated with a day-of-week embedding and projected by the
/// bridge into initial (h, c) for the decoder and the generator:
/// h0 = tanh(B_h z + b_h), c0 = B_c z + b_c.
///
/// The decoder rebuilds the input window in reverse order; its per-channel
/// reconstructed streams feed the appliance-type head (one softmax over
/// channel identities per stream). The generator rolls out the forecast
/// autoregressively from a learned start token.
struct Seq2SeqParams {
  Seq2SeqArch arch;
  BiLstmParams encoder;
  Matrix dow_embedding;  // [7 x embed]
  Matrix dec_h_w, dec_h_b, dec_c_w, dec_c_b;
  Matrix gen_h_w, gen_h_b, gen_c_w, gen_c_b;
  LstmCellParams decoder;
  Matrix dec_start;  // [channels x 1]
  Matrix recon_w, recon_b;
  Matrix type_w, type_b;  // [channels x history], [channels x 1]
  LstmCellParams generator;
  Matrix forecast_w, forecast_b;

  NormalizationParams normalization;  // not trained

  static Seq2SeqParams zeros(const Seq2SeqArch& arch);
  static Seq2SeqParams init(const Seq2SeqArch& arch, Rng& rng);

  template <typename Self, typename F>
  static void visit(Self& self, const std::string& prefix, F&& f) {
    BiLstmParams::visit(self.encoder, prefix + "encoder.", f);
    f(prefix + "dow_embedding", self.dow_embedding);
    f(prefix + "bridge.dec_h_w", self.dec_h_w);
    f(prefix + "bridge.dec_h_b", self.dec_h_b);
    f(prefix + "bridge.dec_c_w", self.dec_c_w);
    f(prefix + "bridge.dec_c_b", self.dec_c_b);
    f(prefix + "bridge.gen_h_w", self.gen_h_w);
    f(prefix + "bridge.gen_h_b", self.gen_h_b);
    f(prefix + "bridge.gen_c_w", self.gen_c_w);
    f(prefix + "bridge.gen_c_b", self.gen_c_b);
    LstmCellParams::visit(self.decoder, prefix + "decoder.", f);
    f(prefix + "decoder.start", self.dec_start);
    f(prefix + "decoder.recon_w", self.recon_w);
    f(prefix + "decoder.recon_b", self.recon_b);
    f(prefix + "decoder.type_w", self.type_w);
    f(prefix + "decoder.type_b", self.type_b);
    LstmCellParams::visit(self.generator, prefix + "generator.", f);
    f(prefix + "generator.forecast_w", self.forecast_w);
    f(prefix + "generator.forecast_b", self.forecast_b);
  }
};

struct EncodedState {
  Matrix summary;  // bi-LSTM summary, [2*encoder_hidden x 1]
  Matrix z;        // summary ++ day embedding
  LstmState decoder_init;
  LstmState generator_init;
  Matrix last_row;  // x_n, the generator's first input [channels x 1]
};

/// `window` is [history x channels], normalized.
EncodedState encode(const Seq2SeqParams& p, const Matrix& window, int day_of_week);

struct Reconstruction {
  Matrix values;       // [history x channels]; row t targets window[history-1-t]
  Matrix type_logits;  // [channels x channels]; row j scores stream j
};

/// With teacher forcing, step t > 0 consumes window[history-t]; otherwise the
/// decoder feeds back its own previous output.
Reconstruction decode_reconstruct(const Seq2SeqParams& p, const EncodedState& state, const Matrix& window,
                                  bool teacher_forcing);

/// Normalized [horizon x channels] autoregressive rollout seeded with x_n.
Matrix generate_forecast_normalized(const Seq2SeqParams& p, const EncodedState& state);

/// Denormalized watts, clamped at 0.
Matrix generate_forecast(const Seq2SeqParams& p, const EncodedState& state);

/// encode + generate_forecast.
Matrix forecast_watts(const Seq2SeqParams& p, const Matrix& window, int day_of_week);
Matrix forecast_normalized(const Seq2SeqParams& p, const Matrix& window, int day_of_week);

struct LossWeights {
  double recon = 0.5;
  double type = 0.1;
  double forecast = 1.0;
};

struct WindowLoss {
  Var total;
  double recon = 0.0;
  double type = 0.0;
  double forecast = 0.0;
};

/// Records the full training loss of one window on `tape`:
/// recon * MSE(reconstruction) + type * CE(type) + forecast * MSE(forecast).
/// Gradients land in `grads` (may be null) on tape.backward.
WindowLoss seq2seq_window_loss(Tape& tape, const Seq2SeqParams& p, Seq2SeqParams* grads, const Matrix& window,
                               int day_of_week, const Matrix& target, const LossWeights& weights);

/// Repeats each channel's last observed value for `horizon` steps.
Matrix persistence_predict(const Matrix& window, std::size_t horizon);

}  // namespace seqdispatch
