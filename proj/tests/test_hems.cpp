#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "seqdispatch/error.hpp"
#include "seqdispatch/hems_env.hpp"

using namespace seqdispatch;

namespace {

HemsConfig small_env(int T) {
  HemsConfig c;
  c.horizon = T;
  c.ess_capacity_kwh = 8.0;
  c.charge_kw = 2.0;
  c.soc_min = 0.25;
  c.soc_max = 0.75;
  c.initial_soc = 0.5;
  set_peak_offpeak_prices(c);
  return c;
}

DeviceSpec device(const std::string& name, double kw, int wait, std::vector<std::uint8_t> slots) {
  DeviceSpec d;
  d.name = name;
  d.rated_kw = kw;
  d.max_wait = wait;
  d.set_request_slots(std::move(slots));
  return d;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("request slots merge into jobs") {
  const std::vector<std::uint8_t> s{0, 1, 1, 0, 1, 0, 0, 1, 1, 1};
  const auto r = merge_request_slots(s);
  REQUIRE(r.size() == 3);
  CHECK(r[0] == DeviceRequest{1, 2});
  CHECK(r[1] == DeviceRequest{4, 1});
  CHECK(r[2] == DeviceRequest{7, 3});
}

TEST_CASE("action index is canonical") {
  for (std::size_t D = 0; D <= 3; ++D) {
    for (std::size_t i = 0; i < (std::size_t{3} << D); ++i) CHECK(action_index(action_from_index(i, D), D) == i);
  }
  CHECK(action_index({-1, 0}, 2) == 0);
  CHECK(action_index({1, 3}, 2) == 11);
}

TEST_CASE("peak and off-peak prices") {
  HemsConfig c;
  set_peak_offpeak_prices(c, 0.3, 0.1, 16, 22, 0.5);
  CHECK(c.price_buy[15] == 0.1);
  CHECK(c.price_buy[16] == 0.3);
  CHECK(c.price_buy[21] == 0.3);
  CHECK(c.price_buy[22] == 0.1);
  CHECK(c.price_sell[16] == 0.15);
  c.price_sell[3] = 1.0;
  CHECK(c.warnings().size() == 1);
}

TEST_CASE("one step by hand") {
  HemsConfig c = small_env(4);
  c.devices.push_back(device("wm", 1.5, 2, {1, 0, 0, 0}));
  const EnvState s = initial_state(c);
  CHECK(s.devices[0].queue_len == 1);
  // discharge, run the washer: net = 2 + 3 - (1 + 1.5) = 2.5 kW sold off-peak
  const StepOutcome o = step(c, s, {1, 1}, 3.0, 1.0);
  CHECK(o.net_kw == doctest::Approx(2.5));
  CHECK(o.sell_indicator == 1);
  CHECK(o.reward == doctest::Approx(2.5 * 0.05));
  CHECK(o.next_state.soc == doctest::Approx(0.25));
  CHECK(o.started_wait[0] == 0);
  CHECK(o.next_state.devices[0].queue_len == 0);
  // charge while buying: net = -2 + 0 - 1 = -3
  const StepOutcome b = step(c, s, {-1, 0}, 0.0, 1.0);
  CHECK(b.reward == doctest::Approx(-3 * 0.1));
  CHECK(b.sell_indicator == 0);
  CHECK(b.next_state.devices[0].head_age == 1);
}

TEST_CASE("SOC bounds make actions infeasible") {
  HemsConfig c = small_env(3);
  c.initial_soc = 0.75;
  const EnvState s = initial_state(c);
  CHECK(infeasibility(c, s, {-1, 0}).has_value());
  CHECK_FALSE(infeasibility(c, s, {1, 0}).has_value());
  CHECK(code_of([&] { step(c, s, {-1, 0}, 0, 0); }) == ErrorCode::InfeasibleAction);
  CHECK(enumerate_actions(c, s).size() == 2);
}

TEST_CASE("waiting cap forces a start and jobs are not preempted") {
  HemsConfig c = small_env(6);
  c.devices.push_back(device("dw", 2.0, 1, {1, 1, 0, 0, 0, 0}));
  EnvState s = initial_state(c);
  CHECK_FALSE(infeasibility(c, s, {0, 0}).has_value());
  s = step(c, s, {0, 0}, 0, 0).next_state;
  // waited one step: must start now
  CHECK(infeasibility(c, s, {0, 0}).has_value());
  const StepOutcome o = step(c, s, {0, 1}, 0, 0);
  CHECK(o.started_wait[0] == 1);
  s = o.next_state;
  CHECK(s.devices[0].running_remaining == 1);
  CHECK(infeasibility(c, s, {0, 0}).has_value());  // still running
  s = step(c, s, {0, 1}, 0, 0).next_state;
  CHECK(infeasibility(c, s, {0, 1}).has_value());  // nothing left to run
}

TEST_CASE("jobs that would overrun the horizon must start") {
  HemsConfig c = small_env(4);
  c.devices.push_back(device("dw", 2.0, 3, {0, 0, 1, 1}));
  EnvState s = initial_state(c);
  s = step(c, s, {0, 0}, 0, 0).next_state;
  s = step(c, s, {0, 0}, 0, 0).next_state;
  REQUIRE(s.devices[0].queue_len == 1);
  CHECK(infeasibility(c, s, {0, 0}).has_value());
}

TEST_CASE("rollout accounting") {
  HemsConfig c = small_env(4);
  c.devices.push_back(device("wm", 1.0, 3, {0, 1, 0, 0}));
  const std::vector<double> pv{0, 2, 3, 0}, base{1, 1, 1, 1};
  const Policy hold = [&](const EnvState& s) {
    DispatchAction a{0, 0};
    if (infeasibility(c, s, a)) a.device_on = 1;
    return a;
  };
  const RolloutResult r = rollout(c, hold, pv, base);
  double sum = 0.0;
  for (const auto& rec : r.trace) sum += rec.outcome.reward;
  CHECK(r.total_profit == sum);
  CHECK(r.unserved_requests == 0);
  CHECK(r.trace.size() == 4);
  CHECK(code_of([&] { rollout(c, hold, std::vector<double>{1}, base); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("requests derived from appliance power") {
  std::map<std::string, std::vector<double>> kw{{"dw", {0.0, 0.6, 2.0, 0.4, 0.0}}};
  HemsConfig c;
  c.horizon = 5;
  const auto devs = derive_device_requests(kw, {device("dw", 2.0, 2, {})});
  REQUIRE(devs.size() == 1);
  CHECK(devs[0].request_slots == std::vector<std::uint8_t>{0, 1, 1, 0, 0});
  CHECK(code_of([&] { derive_device_requests(kw, {device("tv", 1.0, 0, {})}); }) == ErrorCode::UnknownDevice);
}

TEST_CASE("config validation") {
  HemsConfig c = small_env(4);
  c.soc_min = 0.8;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::ValidationError);
  HemsConfig d = small_env(4);
  d.price_buy.pop_back();
  CHECK(code_of([&] { d.validate(); }) == ErrorCode::ValidationError);
}

TEST_CASE("scenario file with inline trajectories") {
  const auto p = std::filesystem::temp_directory_path() / "seqdispatch_scenario.json";
  std::ofstream(p) << R"({"horizon": 3, "ess": {"capacity_kwh": 4, "charge_kw": 1},
    "devices": [{"name": "wm", "rated_kw": 1.0, "max_wait": 1}],
    "trajectory": {"pv_kw": [0, 1, 2], "base_load_kw": [1, 1, 1], "device_kw": {"wm": [0, 1, 0]}}})";
  const Scenario s = load_scenario(p);
  CHECK(s.config.horizon == 3);
  CHECK(s.config.devices[0].requests.size() == 1);
  CHECK(s.pv_kw[2] == 2.0);
}

TEST_CASE("random rollouts keep invariants, serial equals parallel") {
  HemsConfig c = small_env(24);
  c.devices.push_back(device("dw", 2.0, 3, std::vector<std::uint8_t>(24, 0)));
  c.devices[0].set_request_slots({0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0});
  std::vector<double> pv(24), base(24, 0.5);
  for (int t = 8; t < 17; ++t) pv[static_cast<std::size_t>(t)] = 3.0;
  const auto a = random_rollouts(c, pv, base, 500, 17, ExecPolicy::serial);
  const auto b = random_rollouts(c, pv, base, 500, 17, ExecPolicy::parallel, 4);
  CHECK(a == b);
  CHECK(a.soc_violations == 0);
  CHECK(a.wait_violations == 0);
  CHECK(a.unserved == 0);
  CHECK(a.max_energy_error_kwh <= 1e-9);
}
