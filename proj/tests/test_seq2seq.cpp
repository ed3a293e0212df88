#include <doctest.h>

#include "gradcheck.hpp"
#include "seqdispatch/error.hpp"
#include "seqdispatch/lstm_baseline.hpp"
#include "seqdispatch/seq2seq.hpp"
#include "seqdispatch/synthetic.hpp"
#include "seqdispatch/trainer.hpp"

using namespace seqdispatch;

namespace {

Seq2SeqArch tiny_arch() {
  Seq2SeqArch a;
  a.channels = 3;
  a.history_len = 5;
  a.horizon_len = 3;
  a.encoder_hidden = 3;
  a.decoder_hidden = 4;
  a.embed_dim = 2;
  return a;
}

Matrix random_window(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (auto& v : m.values()) v = rng.uniform(0.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("seq2seq output shapes and determinism") {
  Rng rng(1);
  const auto p = Seq2SeqParams::init(tiny_arch(), rng);
  const Matrix w = random_window(5, 3, rng);
  const Matrix f = forecast_normalized(p, w, 2);
  CHECK(f.rows() == 3);
  CHECK(f.cols() == 3);
  CHECK(forecast_normalized(p, w, 2) == f);
  CHECK_FALSE(forecast_normalized(p, w, 3) == f);
  const EncodedState e = encode(p, w, 2);
  CHECK(e.summary.rows() == 6);
  CHECK(generate_forecast_normalized(p, e) == f);
  const Reconstruction rec = decode_reconstruct(p, e, w, true);
  CHECK(rec.values.rows() == 5);
  CHECK(rec.type_logits.rows() == 3);
  CHECK(rec.type_logits.cols() == 3);
  CHECK_THROWS_AS(forecast_normalized(p, random_window(4, 3, rng), 0), Error);
  CHECK_THROWS_AS(forecast_normalized(p, w, 7), Error);
}

TEST_CASE("forecast does not depend on reconstruction loss weights") {
  Rng rng(2);
  const auto p = Seq2SeqParams::init(tiny_arch(), rng);
  const Matrix w = random_window(5, 3, rng);
  const Matrix target = random_window(3, 3, rng);
  Tape a, b;
  const auto la = seq2seq_window_loss(a, p, nullptr, w, 1, target, {1.0, 1.0, 1.0});
  const auto lb = seq2seq_window_loss(b, p, nullptr, w, 1, target, {0.0, 0.0, 1.0});
  CHECK(la.forecast == lb.forecast);
  CHECK(la.recon > 0.0);
  CHECK(la.type > 0.0);
}

TEST_CASE("seq2seq loss gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    auto p = Seq2SeqParams::init(tiny_arch(), rng);
    const Matrix w = random_window(5, 3, rng);
    const Matrix target = random_window(3, 3, rng);
    const auto r = gradcheck::check_struct(p, [&](Tape& t, const Seq2SeqParams& q, Seq2SeqParams* g) {
      return seq2seq_window_loss(t, q, g, w, static_cast<int>(seed % 7), target, {0.5, 0.2, 1.0}).total;
    });
    INFO("worst " << r.worst);
    CHECK(r.max_rel < 1e-4);
  }
}

TEST_CASE("lstm baseline gradients match finite differences") {
  Rng rng(4);
  LstmBaselineArch a;
  a.channels = 2;
  a.history_len = 4;
  a.horizon_len = 2;
  a.hidden = 3;
  a.embed_dim = 2;
  auto p = LstmBaselineParams::init(a, rng);
  const Matrix w = random_window(4, 2, rng);
  const Matrix target = random_window(2, 2, rng);
  const auto r = gradcheck::check_struct(p, [&](Tape& t, const LstmBaselineParams& q, LstmBaselineParams* g) {
    return lstm_baseline_window_loss(t, q, g, w, 5, target);
  });
  CHECK(r.max_rel < 1e-4);
  CHECK(lstm_baseline_forecast_normalized(p, w, 5).rows() == 2);
}

TEST_CASE("persistence repeats the last row") {
  Matrix w(3, 2);
  w(2, 0) = 4;
  w(2, 1) = 7;
  const Matrix f = persistence_predict(w, 4);
  CHECK(f.rows() == 4);
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(f(t, 0) == 4);
    CHECK(f(t, 1) == 7);
  }
  CHECK_THROWS_AS(persistence_predict(Matrix(0, 2), 3), Error);
}

TEST_CASE("denormalize_forecast clamps at zero") {
  NormalizationParams n{{"a"}, {100.0}, {300.0}};
  Matrix m(2, 1);
  m[0] = 0.5;
  m[1] = -1.0;
  const Matrix w = denormalize_forecast(n, m);
  CHECK(w[0] == 200.0);
  CHECK(w[1] == 0.0);
}

TEST_CASE("short training lowers the training loss") {
  SyntheticConfig sc;
  sc.days = 12;
  const SeriesFrame frame = resample_mean(generate_synthetic(sc), 1800);
  const WindowedSplits s = make_windows(frame, 12, 2, SplitSpec{});
  Seq2SeqArch a;
  a.channels = frame.num_channels();
  a.history_len = 12;
  a.horizon_len = 2;
  a.encoder_hidden = 6;
  a.decoder_hidden = 8;
  Rng rng(9);
  auto init = Seq2SeqParams::init(a, rng);
  init.normalization = s.normalization;
  TrainConfig tc;
  tc.epochs = 6;
  tc.lr = 1e-2;
  tc.patience = 0;
  const auto res = train_seq2seq(init, s.train, s.val, tc);
  REQUIRE(res.trace.epochs.size() == 6);
  CHECK(res.trace.epochs.back().train_loss < res.trace.epochs.front().train_loss);
  CHECK(res.trace.best_epoch >= 1);

  TrainConfig zero = tc;
  zero.epochs = 0;
  const auto same = train_seq2seq(init, s.train, s.val, zero);
  CHECK(same.params.forecast_w == init.forecast_w);
  CHECK(same.trace.epochs.empty());
}
