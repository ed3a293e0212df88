#include <doctest.h>

#include <filesystem>

#include "seqdispatch/error.hpp"
#include "seqdispatch/q_dispatch.hpp"

using namespace seqdispatch;

namespace {

HemsConfig env(int T) {
  HemsConfig c;
  c.horizon = T;
  c.ess_capacity_kwh = 8.0;
  c.charge_kw = 2.0;
  c.soc_min = 0.25;
  c.soc_max = 0.75;
  set_peak_offpeak_prices(c, 0.3, 0.1, 2, 4, 0.5);
  return c;
}

}  // namespace

TEST_CASE("soc bins") {
  HemsConfig c = env(4);
  CHECK(soc_bin(0.25, c, 4) == 0);
  CHECK(soc_bin(0.375, c, 4) == 1);
  CHECK(soc_bin(0.5, c, 4) == 2);
  CHECK(soc_bin(0.75, c, 4) == 3);  // the top edge joins the last bin
  CHECK(soc_bin(0.5 - 1e-12, c, 4) == 2);
  EnvState s = initial_state(c);
  const QKey k = discretize(s, c, 4);
  CHECK(k.t() == 0);
  CHECK(k.soc_bin() == 2);
}

TEST_CASE("epsilon schedule") {
  QLearnConfig q;
  CHECK(q.epsilon(0) == doctest::Approx(0.1));
  CHECK(q.epsilon(1000) == doctest::Approx(0.1 * std::pow(0.999, 1000)));
  CHECK(q.epsilon(100000) == q.epsilon_floor);
  q.gamma = 0.0;
  CHECK_THROWS_AS(q.validate(), Error);
}

TEST_CASE("greedy selection breaks ties to the lowest index") {
  QTable t(6, 4);
  QKey k;
  Rng rng(1);
  const std::vector<std::size_t> feasible{1, 3, 5};
  CHECK(select_action(t, k, feasible, 0.0, rng) == 1);
  t.at(k, 5) = 2.0;
  t.at(k, 3) = 2.0;
  CHECK(select_action(t, k, feasible, 0.0, rng) == 3);
  t.at(k, 0) = 9.0;  // infeasible, ignored
  CHECK(select_action(t, k, feasible, 0.0, rng) == 3);
  CHECK_THROWS_AS(select_action(t, k, std::vector<std::size_t>{}, 0.0, rng), Error);
  int explored = 0;
  for (int i = 0; i < 200; ++i) explored += select_action(t, k, feasible, 1.0, rng) != 3 ? 1 : 0;
  CHECK(explored > 80);
}

TEST_CASE("q update rule") {
  QTable t(3, 4);
  QKey a, b;
  b.bytes[0] = 1;
  t.at(b, 0) = 4.0;
  t.at(b, 2) = 10.0;
  t.at(a, 1) = 1.0;
  const std::vector<std::size_t> next{0, 1};
  // only feasible successors count: max = 4
  const double v = q_update(t, a, 1, 2.0, b, next, 0.5, 0.9);
  CHECK(v == doctest::Approx(0.5 * 1.0 + 0.5 * (2.0 + 0.9 * 4.0)));
  const double term = q_update(t, a, 2, 3.0, b, std::vector<std::size_t>{}, 1.0, 0.9);
  CHECK(term == 3.0);
}

TEST_CASE("q table save and load") {
  QTable t(12, 16);
  QKey k;
  k.bytes[1] = 3;
  t.at(k, 4) = -1.5;
  t.add_visit(k, 4);
  QKey k2;
  k2.bytes[0] = 2;
  t.at(k2, 11) = 0.25;
  const auto p = std::filesystem::temp_directory_path() / "seqdispatch_q.bin";
  t.save(p);
  const QTable u = QTable::load(p);
  CHECK(u == t);
  CHECK(u.visits(k, 4) == 1);
  CHECK(u.keys().front() == k);
  CHECK(t.summary().states == 2);
}

TEST_CASE("offline training is seeded and its greedy rollout is the prediction") {
  HemsConfig c = env(6);
  DeviceSpec d;
  d.name = "wm";
  d.rated_kw = 1.0;
  d.max_wait = 2;
  d.set_request_slots({0, 1, 1, 0, 0, 0});
  c.devices.push_back(d);
  const std::vector<double> pv{0, 1, 3, 3, 1, 0}, base{0.5, 0.5, 0.5, 1, 1, 0.5};
  QLearnConfig q;
  q.episodes = 300;
  q.soc_bins = 4;
  q.seed = 5;
  const OfflineResult a = train_offline(q, c, pv, base);
  const OfflineResult b = train_offline(q, c, pv, base);
  CHECK(a.table == b.table);
  CHECK(a.episode_profit == b.episode_profit);
  CHECK(a.episode_profit.size() == 300);
  const RolloutResult r = test_online(a.table, c, pv, base);
  CHECK(r.total_profit == a.predicted_profit);
  q.seed = 6;
  CHECK_FALSE(train_offline(q, c, pv, base).episode_profit == a.episode_profit);
  CHECK(max_step_reward(c, pv, base) > 0.0);
}
