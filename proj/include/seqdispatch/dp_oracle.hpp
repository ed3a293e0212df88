#pragma once

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include "seqdispatch/hems_env.hpp"
#include "seqdispatch/parallel.hpp"
#include "seqdispatch/q_dispatch.hpp"

namespace seqdispatch {

/// Reachable discretized states of one time step with their optimal values
/// and actions.
struct ValueLayer {
  std::vector<EnvState> states;
  std::vector<QKey> keys;
  std::vector<double> value;             // optimal profit-to-go
  std::vector<std::size_t> best_action;  // canonical index, ties to the lowest
  std::unordered_map<QKey, std::size_t, QKeyHash> index;
};

struct DpSolution {
  double optimal_profit = 0.0;
  std::vector<DispatchAction> actions;  // optimal sequence from the initial state
  std::vector<ValueLayer> layers;       // t = 0..T; layer T holds terminal states with value 0
  std::size_t state_count = 0;
};

struct DpOptions {
  std::size_t soc_bins = 16;
  std::size_t max_states = 1000000;
  ExecPolicy policy = ExecPolicy::parallel;
  int jobs = 0;
};

/// Throws LatticeMismatch unless one charge step spans a whole number of SOC
/// bins and distinct reachable SOC levels fall in distinct bins.
void check_lattice(const HemsConfig& config, std::size_t soc_bins);

/// Exact backward induction over the states reachable from the initial
/// state, using the environment's own transition and reward.
/// Throws StateSpaceTooLarge, LatticeMismatch.
DpSolution dp_solve(const HemsConfig& config, std::span<const double> pv_kw, std::span<const double> base_load_kw,
                    const DpOptions& options = {});

}  // namespace seqdispatch
