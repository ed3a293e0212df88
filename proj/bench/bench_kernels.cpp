// Serial vs OpenMP twins of the hot kernels. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include <cmath>
#include <numeric>

#include "seqdispatch/adam.hpp"
#include "seqdispatch/dp_oracle.hpp"
#include "seqdispatch/hems_env.hpp"
#include "seqdispatch/synthetic.hpp"
#include "seqdispatch/trainer.hpp"

using namespace seqdispatch;

namespace {

ExecPolicy policy_of(const benchmark::State& state) {
  return state.range(0) == 0 ? ExecPolicy::serial : ExecPolicy::parallel;
}

const WindowedSplits& splits() {
  static const WindowedSplits s = [] {
    SyntheticConfig c;
    c.days = 30;
    return make_windows(resample_mean(generate_synthetic(c), 600), 72, 6, SplitSpec{});
  }();
  return s;
}

struct Day {
  HemsConfig config;
  std::vector<double> pv, base;
};

const Day& day() {
  static const Day d = [] {
    Day out;
    set_peak_offpeak_prices(out.config);
    for (int h = 0; h < 24; ++h) {
      out.pv.push_back(h >= 6 && h <= 19 ? 4.0 * std::sin((h - 5) * M_PI / 15.0) : 0.0);
      out.base.push_back(0.4 + (h >= 17 && h <= 21 ? 1.0 : 0.0));
    }
    const auto device = [](const char* name, double kw, int wait, std::initializer_list<int> on) {
      DeviceSpec d;
      d.name = name;
      d.rated_kw = kw;
      d.max_wait = wait;
      std::vector<std::uint8_t> slots(24, 0);
      for (int h : on) slots[static_cast<std::size_t>(h)] = 1;
      d.set_request_slots(slots);
      return d;
    };
    out.config.devices = {device("dishwasher", 2.0, 3, {19, 20}), device("washing_machine", 2.0, 4, {8, 9}),
                          device("tumble_dryer", 2.4, 4, {11, 12})};
    return out;
  }();
  return d;
}

void BM_Seq2SeqBatchGradient(benchmark::State& state) {
  Seq2SeqArch a;
  a.channels = 6;
  a.history_len = 72;
  a.horizon_len = 6;
  a.encoder_hidden = 32;
  a.decoder_hidden = 48;
  Rng rng(1);
  const auto p = Seq2SeqParams::init(a, rng);
  auto grads = zeros_like(p);
  std::vector<std::size_t> windows(64);
  std::iota(windows.begin(), windows.end(), 0);
  for (auto _ : state) {
    const auto loss = seq2seq_batch_gradient(p, splits().train, windows, {}, policy_of(state), 0, grads);
    benchmark::DoNotOptimize(loss.total);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(windows.size()));
}
BENCHMARK(BM_Seq2SeqBatchGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_DpSolve(benchmark::State& state) {
  DpOptions o;
  o.policy = policy_of(state);
  for (auto _ : state) {
    const auto s = dp_solve(day().config, day().pv, day().base, o);
    benchmark::DoNotOptimize(s.optimal_profit);
  }
}
BENCHMARK(BM_DpSolve)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_RandomRollouts(benchmark::State& state) {
  for (auto _ : state) {
    const auto s = random_rollouts(day().config, day().pv, day().base, 10000, 3, policy_of(state));
    benchmark::DoNotOptimize(s.max_energy_error_kwh);
  }
  state.SetItemsProcessed(state.iterations() * 10000);
}
BENCHMARK(BM_RandomRollouts)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
