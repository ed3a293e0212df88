#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <utility>

#include "seqdispatch/adam.hpp"
#include "seqdispatch/error.hpp"
#include "seqdispatch/parallel.hpp"
#include "seqdispatch/synthetic.hpp"
#include "seqdispatch/trainer.hpp"

using namespace seqdispatch;

namespace {

const WindowedSplits& splits() {
  static const WindowedSplits s = [] {
    SyntheticConfig c;
    c.days = 10;
    return make_windows(resample_mean(generate_synthetic(c), 1800), 10, 2, SplitSpec{});
  }();
  return s;
}

}  // namespace

TEST_CASE("policy parsing") {
  CHECK(exec_policy_from_string("serial") == ExecPolicy::serial);
  CHECK(exec_policy_from_string("parallel") == ExecPolicy::parallel);
  CHECK_THROWS_AS(exec_policy_from_string("gpu"), Error);
  CHECK(resolve_jobs(3) == 3);
  CHECK(resolve_jobs(0) >= 1);
}

TEST_CASE("for_each_index visits everything and rethrows") {
  std::vector<int> hit(100, 0);
  for_each_index(ExecPolicy::parallel, hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
  CHECK(std::count(hit.begin(), hit.end(), 1) == 100);
  CHECK_THROWS_AS(for_each_index(ExecPolicy::parallel, 10, 4,
                                 [](std::size_t i) {
                                   if (i == 7) throw Error(ErrorCode::Empty, "boom");
                                 }),
                  Error);
}

TEST_CASE("seq2seq batch gradient is bit-identical serial vs parallel") {
  const auto& s = splits();
  Seq2SeqArch a;
  a.channels = s.train.num_channels();
  a.history_len = 10;
  a.horizon_len = 2;
  a.encoder_hidden = 5;
  a.decoder_hidden = 6;
  Rng rng(2);
  const auto p = Seq2SeqParams::init(a, rng);
  std::vector<std::size_t> windows;
  for (std::size_t i = 0; i < 24; ++i) windows.push_back(i * 7 % s.train.size());
  auto g1 = zeros_like(p), g2 = zeros_like(p);
  const auto l1 = seq2seq_batch_gradient(p, s.train, windows, {}, ExecPolicy::serial, 1, g1);
  const auto l2 = seq2seq_batch_gradient(p, s.train, windows, {}, ExecPolicy::parallel, 4, g2);
  CHECK(l1.total == l2.total);
  const auto a1 = param_list(std::as_const(g1));
  const auto a2 = param_list(std::as_const(g2));
  for (std::size_t i = 0; i < a1.size(); ++i) CHECK(*a1[i] == *a2[i]);
}

TEST_CASE("lstm batch gradient and evaluation are bit-identical serial vs parallel") {
  const auto& s = splits();
  LstmBaselineArch a;
  a.channels = s.train.num_channels();
  a.history_len = 10;
  a.horizon_len = 2;
  a.hidden = 5;
  Rng rng(3);
  auto p = LstmBaselineParams::init(a, rng);
  p.normalization = s.normalization;
  std::vector<std::size_t> windows{0, 5, 9, 11, 30, 31};
  auto g1 = zeros_like(p), g2 = zeros_like(p);
  lstm_baseline_batch_gradient(p, s.train, windows, ExecPolicy::serial, 1, g1);
  lstm_baseline_batch_gradient(p, s.train, windows, ExecPolicy::parallel, 3, g2);
  CHECK(g1.head_w == g2.head_w);
  CHECK(g1.layer1.w_i == g2.layer1.w_i);

  const Forecaster f = [&](const Matrix& w, int dow) { return lstm_baseline_forecast_watts(p, w, dow); };
  const auto idx = evaluation_windows(s.test, 1, 0, false);
  const auto r1 = evaluate_forecaster("x", s.test, idx, f, ExecPolicy::serial, 1);
  const auto r2 = evaluate_forecaster("x", s.test, idx, f, ExecPolicy::parallel, 4);
  CHECK(r1.channels == r2.channels);
}

TEST_CASE("evaluation windows") {
  const auto& s = splits();
  const auto all = evaluation_windows(s.val, 1, 0, false);
  CHECK(all.size() == s.val.size());
  const auto strided = evaluation_windows(s.val, 5, 0, false);
  CHECK(strided[1] == 5);
  CHECK(evaluation_windows(s.val, 1, 7, false).size() == 7);
}
