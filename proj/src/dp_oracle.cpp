#include "seqdispatch/dp_oracle.hpp"

#include <cmath>
#include <limits>
#include <set>

#include "seqdispatch/error.hpp"

namespace seqdispatch {

void check_lattice(const HemsConfig& config, std::size_t bins) {
  const double width = (config.soc_max - config.soc_min) / static_cast<double>(bins);
  const double ratio = config.soc_step() / width;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0) {
    throw Error(ErrorCode::LatticeMismatch, "charge step " + std::to_string(config.soc_step()) + " is " +
                                                std::to_string(ratio) + " SOC bins of width " + std::to_string(width));
  }
  // Levels reachable from S0 in whole charge steps, inside the bounds.
  std::set<int> seen;
  const double step = config.soc_step();
  const auto levels_below = static_cast<long>(std::floor((config.initial_soc - config.soc_min) / step + 1e-9));
  const auto levels_above = static_cast<long>(std::floor((config.soc_max - config.initial_soc) / step + 1e-9));
  for (long k = -levels_below; k <= levels_above; ++k) {
    const double soc = config.initial_soc + static_cast<double>(k) * step;
    if (!seen.insert(soc_bin(soc, config, bins)).second) {
      throw Error(ErrorCode::LatticeMismatch, "two reachable SOC levels share bin " +
                                                  std::to_string(soc_bin(soc, config, bins)));
    }
  }
}

DpSolution dp_solve(const HemsConfig& config, std::span<const double> pv_kw, std::span<const double> base_load_kw,
                    const DpOptions& options) {
  config.validate();
  check_lattice(config, options.soc_bins);
  const auto T = static_cast<std::size_t>(config.horizon);
  if (pv_kw.size() != T || base_load_kw.size() != T) {
    throw Error(ErrorCode::LengthMismatch, "trajectories must have one entry per step");
  }
  const std::size_t D = config.devices.size();
  DpSolution sol;
  sol.layers.resize(T + 1);

  // Forward reachability.
  const auto add_state = [&](ValueLayer& layer, const EnvState& s) {
    const QKey k = discretize(s, config, options.soc_bins);
    if (layer.index.try_emplace(k, layer.states.size()).second) {
      layer.states.push_back(s);
      layer.keys.push_back(k);
      if (++sol.state_count > options.max_states) {
        throw Error(ErrorCode::StateSpaceTooLarge,
                    "more than " + std::to_string(options.max_states) + " reachable states");
      }
    }
  };
  add_state(sol.layers[0], initial_state(config));
  std::vector<std::size_t> feasible;
  for (std::size_t t = 0; t < T; ++t) {
    for (const EnvState& s : sol.layers[t].states) {
      feasible_action_indices(config, s, feasible);
      for (std::size_t a : feasible) {
        add_state(sol.layers[t + 1], step(config, s, action_from_index(a, D), pv_kw[t], base_load_kw[t]).next_state);
      }
    }
  }

  // Backward induction; states within a layer are independent.
  ValueLayer& last = sol.layers[T];
  last.value.assign(last.states.size(), 0.0);
  last.best_action.assign(last.states.size(), 0);
  for (std::size_t t = T; t-- > 0;) {
    ValueLayer& layer = sol.layers[t];
    const ValueLayer& next = sol.layers[t + 1];
    layer.value.assign(layer.states.size(), 0.0);
    layer.best_action.assign(layer.states.size(), 0);
    for_each_index(options.policy, layer.states.size(), options.jobs, [&](std::size_t i) {
      std::vector<std::size_t> acts;
      feasible_action_indices(config, layer.states[i], acts);
      double best = -std::numeric_limits<double>::infinity();
      std::size_t best_a = 0;
      for (std::size_t a : acts) {
        const StepOutcome o = step(config, layer.states[i], action_from_index(a, D), pv_kw[t], base_load_kw[t]);
        const QKey nk = discretize(o.next_state, config, options.soc_bins);
        const double v = o.reward + next.value[next.index.at(nk)];
        if (v > best) {
          best = v;
          best_a = a;
        }
      }
      if (acts.empty()) throw Error(ErrorCode::NoFeasibleAction, "no feasible action at step " + std::to_string(t));
      layer.value[i] = best;
      layer.best_action[i] = best_a;
    });
  }

  // Extract the optimal action sequence; the profit is summed forward in
  // step order so a replay through rollout() reproduces it bit for bit.
  EnvState s = sol.layers[0].states[0];
  for (std::size_t t = 0; t < T; ++t) {
    const ValueLayer& layer = sol.layers[t];
    const std::size_t i = layer.index.at(discretize(s, config, options.soc_bins));
    const DispatchAction a = action_from_index(layer.best_action[i], D);
    sol.actions.push_back(a);
    const StepOutcome o = step(config, s, a, pv_kw[t], base_load_kw[t]);
    sol.optimal_profit += o.reward;
    s = o.next_state;
  }
  return sol;
}

}  // namespace seqdispatch
