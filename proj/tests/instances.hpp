#pragma once

// Small seeded dispatch instances and a brute-force optimum over every
// feasible action sequence.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "seqdispatch/hems_env.hpp"
#include "seqdispatch/rng.hpp"

namespace instances {

using namespace seqdispatch;

struct Instance {
  HemsConfig config;
  std::vector<double> pv_kw;
  std::vector<double> base_load_kw;
  std::size_t soc_bins = 0;
};

// Lattice-aligned: one charge step spans a whole number of SOC bins and S0
// sits on a bin centre, so every reachable level does too.
inline Instance make_small(std::uint64_t seed, int T, std::size_t devices, std::size_t bins) {
  Rng rng(seed);
  Instance in;
  HemsConfig& c = in.config;
  c.horizon = T;
  c.soc_min = 0.1;
  c.soc_max = 0.9;
  c.ess_capacity_kwh = 10.0;
  const double width = (c.soc_max - c.soc_min) / static_cast<double>(bins);
  const auto span = 1 + rng.below(std::max<std::uint64_t>(1, bins / 3));
  c.charge_kw = static_cast<double>(span) * width * c.ess_capacity_kwh;  // step_hours = 1
  c.initial_soc = c.soc_min + (static_cast<double>(rng.below(bins)) + 0.5) * width;
  set_peak_offpeak_prices(c, 0.25, 0.08, static_cast<double>(rng.below(static_cast<std::uint64_t>(T))),
                          static_cast<double>(T), 0.5);
  in.soc_bins = bins;
  for (int t = 0; t < T; ++t) {
    in.pv_kw.push_back(rng.uniform() < 0.5 ? rng.uniform(0.0, 4.0) : 0.0);
    in.base_load_kw.push_back(rng.uniform(0.2, 2.0));
  }
  for (std::size_t l = 0; l < devices; ++l) {
    DeviceSpec d;
    d.name = "dev" + std::to_string(l);
    d.rated_kw = rng.uniform(0.5, 2.5);
    d.max_wait = static_cast<int>(rng.below(3));
    std::vector<std::uint8_t> slots(static_cast<std::size_t>(T), 0);
    const auto start = rng.below(static_cast<std::uint64_t>(T));
    const auto len = 1 + rng.below(2);
    for (std::uint64_t k = start; k < start + len && k < static_cast<std::uint64_t>(T); ++k) slots[k] = 1;
    d.set_request_slots(slots);
    c.devices.push_back(d);
  }
  return in;
}

inline double brute_force_best(const HemsConfig& c, const EnvState& s, std::span<const double> pv,
                               std::span<const double> base) {
  if (s.t >= c.horizon) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  const auto t = static_cast<std::size_t>(s.t);
  for (const DispatchAction& a : enumerate_actions(c, s)) {
    const StepOutcome o = step(c, s, a, pv[t], base[t]);
    best = std::max(best, o.reward + brute_force_best(c, o.next_state, pv, base));
  }
  return best;
}

inline double brute_force_best(const Instance& in) {
  return brute_force_best(in.config, initial_state(in.config), in.pv_kw, in.base_load_kw);
}

}  // namespace instances
