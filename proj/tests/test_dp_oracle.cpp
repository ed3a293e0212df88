#include <doctest.h>

#include "instances.hpp"
#include "seqdispatch/dp_oracle.hpp"
#include "seqdispatch/error.hpp"

using namespace seqdispatch;

TEST_CASE("dp matches brute force on tiny horizons") {
  for (std::uint64_t seed = 1; seed <= 24; ++seed) {
    const int T = 2 + static_cast<int>(seed % 5);  // 2..6
    const auto in = instances::make_small(seed, T, seed % 3, 3 + seed % 6);
    DpOptions o;
    o.soc_bins = in.soc_bins;
    const DpSolution sol = dp_solve(in.config, in.pv_kw, in.base_load_kw, o);
    const double brute = instances::brute_force_best(in);
    INFO("seed " << seed);
    CHECK(sol.optimal_profit == doctest::Approx(brute).epsilon(1e-12).scale(1.0));
    CHECK(sol.actions.size() == static_cast<std::size_t>(T));
  }
}

TEST_CASE("replaying the dp actions reproduces the optimum") {
  const auto in = instances::make_small(77, 8, 2, 8);
  DpOptions o;
  o.soc_bins = 8;
  const DpSolution sol = dp_solve(in.config, in.pv_kw, in.base_load_kw, o);
  std::size_t i = 0;
  const Policy replay = [&](const EnvState&) { return sol.actions[i++]; };
  const RolloutResult r = rollout(in.config, replay, in.pv_kw, in.base_load_kw);
  CHECK(r.total_profit == sol.optimal_profit);
  CHECK(sol.layers.size() == 9);
  CHECK(sol.layers[0].states.size() == 1);
  CHECK(sol.layers[0].value[0] == doctest::Approx(sol.optimal_profit));
}

TEST_CASE("bellman consistency at every layer") {
  const auto in = instances::make_small(5, 6, 2, 6);
  DpOptions o;
  o.soc_bins = 6;
  const DpSolution sol = dp_solve(in.config, in.pv_kw, in.base_load_kw, o);
  for (std::size_t t = 0; t < 6; ++t) {
    const ValueLayer& L = sol.layers[t];
    const ValueLayer& N = sol.layers[t + 1];
    for (std::size_t s = 0; s < L.states.size(); ++s) {
      double best = -1e300;
      for (const auto& a : enumerate_actions(in.config, L.states[s])) {
        const StepOutcome out = step(in.config, L.states[s], a, in.pv_kw[t], in.base_load_kw[t]);
        const QKey k = discretize(out.next_state, in.config, 6);
        best = std::max(best, out.reward + N.value[N.index.at(k)]);
      }
      CHECK(std::abs(best - L.value[s]) <= 1e-9);
    }
  }
}

TEST_CASE("serial and parallel dp agree exactly") {
  const auto in = instances::make_small(9, 8, 2, 9);
  DpOptions a, b;
  a.soc_bins = b.soc_bins = 9;
  a.policy = ExecPolicy::serial;
  b.policy = ExecPolicy::parallel;
  b.jobs = 4;
  const DpSolution x = dp_solve(in.config, in.pv_kw, in.base_load_kw, a);
  const DpSolution y = dp_solve(in.config, in.pv_kw, in.base_load_kw, b);
  CHECK(x.optimal_profit == y.optimal_profit);
  CHECK(x.actions == y.actions);
  CHECK(x.layers[3].value == y.layers[3].value);
}

TEST_CASE("lattice and size errors") {
  auto in = instances::make_small(3, 4, 0, 4);
  DpOptions o;
  o.soc_bins = 7;  // step no longer a whole number of bins
  try {
    dp_solve(in.config, in.pv_kw, in.base_load_kw, o);
    FAIL("expected LatticeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LatticeMismatch);
  }
  o.soc_bins = 4;
  o.max_states = 3;
  try {
    dp_solve(in.config, in.pv_kw, in.base_load_kw, o);
    FAIL("expected StateSpaceTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StateSpaceTooLarge);
  }
}
