#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "seqdispatch/parallel.hpp"

namespace seqdispatch {

inline constexpr std::size_t kMaxDevices = 4;
inline constexpr std::size_t kMaxQueue = 8;

/// One non-preemptive job: the device must run `length` consecutive steps.
struct DeviceRequest {
  int arrival = 0;
  int length = 1;

  friend bool operator==(const DeviceRequest&, const DeviceRequest&) = default;
};

struct DeviceSpec {
  std::string name;
  double rated_kw = 0.0;
  bool deferrable = true;
  int max_wait = 0;  // steps
  std::vector<std::uint8_t> request_slots;
  std::vector<DeviceRequest> requests;  // consecutive slots merged, arrival order

  /// Sets `request_slots` and rebuilds `requests` from them.
  void set_request_slots(std::vector<std::uint8_t> slots);
};

/// Merges runs of set slots into requests.
std::vector<DeviceRequest> merge_request_slots(std::span<const std::uint8_t> slots);

struct HemsConfig {
  double ess_capacity_kwh = 16.0;
  double charge_kw = 4.0;
  double soc_min = 0.1;
  double soc_max = 0.9;
  double step_hours = 1.0;
  double initial_soc = 0.5;
  int horizon = 24;
  std::vector<double> price_buy;   // per step, currency/kWh
  std::vector<double> price_sell;  // per step
  std::vector<DeviceSpec> devices;

  /// Throws ValidationError.
  void validate() const;
  /// Non-fatal findings such as p_sell > p_buy at some step.
  std::vector<std::string> warnings() const;

  /// SOC change of one full-power step.
  double soc_step() const noexcept { return charge_kw * step_hours / ess_capacity_kwh; }
  std::size_t num_actions() const noexcept { return std::size_t{3} << devices.size(); }
};

/// Buy price `peak_buy` for steps whose start hour lies in
/// [peak_start_hour, peak_end_hour), `offpeak_buy` otherwise; sell is
/// `sell_ratio` times buy.
void set_peak_offpeak_prices(HemsConfig& config, double peak_buy = 0.20, double offpeak_buy = 0.10,
                             double peak_start_hour = 16.0, double peak_end_hour = 22.0, double sell_ratio = 0.5);

struct DeviceState {
  std::int16_t running_remaining = 0;  // steps left of the job in progress
  std::int16_t queue_len = 0;          // arrived, not yet started
  std::int16_t head_age = 0;           // steps the queue head has been eligible to start
  std::int16_t next_request = 0;       // index of the next request not yet arrived

  friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

/// Value-semantic, trivially copyable MDP state.
struct EnvState {
  int t = 0;
  double soc = 0.0;
  std::array<DeviceState, kMaxDevices> devices{};

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

/// q: -1 charge, 0 hold, +1 discharge. Bit l of `device_on` is G_l.
struct DispatchAction {
  int q = 0;
  std::uint32_t device_on = 0;

  bool on(std::size_t device) const noexcept { return ((device_on >> device) & 1U) != 0; }
  friend bool operator==(const DispatchAction&, const DispatchAction&) = default;
};

/// (q + 1) * 2^D + device bits; the canonical ordering of actions.
std::size_t action_index(const DispatchAction& a, std::size_t num_devices) noexcept;
DispatchAction action_from_index(std::size_t index, std::size_t num_devices) noexcept;

struct StepOutcome {
  double reward = 0.0;
  EnvState next_state;
  int sell_indicator = 0;  // 1 iff net_kw > 0
  double net_kw = 0.0;
  double ess_kw = 0.0;   // P^E, positive = discharge
  double load_kw = 0.0;  // base + switched devices
  bool infeasible = false;
  /// Waiting time of a request started this step per device, -1 if none.
  std::array<int, kMaxDevices> started_wait{-1, -1, -1, -1};
};

/// State at t = 0 with requests arriving at step 0 already queued.
EnvState initial_state(const HemsConfig& config);

/// Empty when feasible, otherwise the reason.
std::optional<std::string> infeasibility(const HemsConfig& config, const EnvState& state, const DispatchAction& action);

/// Applies one step. Throws InfeasibleAction.
StepOutcome step(const HemsConfig& config, const EnvState& state, const DispatchAction& action, double pv_kw,
                 double base_load_kw);

/// Feasible actions in canonical order.
std::vector<DispatchAction> enumerate_actions(const HemsConfig& config, const EnvState& state);
/// Same, as canonical indices appended to `out` (cleared first).
void feasible_action_indices(const HemsConfig& config, const EnvState& state, std::vector<std::size_t>& out);

struct StepRecord {
  int t = 0;
  double soc = 0.0;  // before the step
  DispatchAction action;
  StepOutcome outcome;
};

struct RolloutResult {
  double total_profit = 0.0;
  std::vector<StepRecord> trace;
  double final_soc = 0.0;
  int unserved_requests = 0;     // still queued at the horizon
  int cut_off_requests = 0;      // running past the horizon

  void write_trace_csv(const std::filesystem::path& path, const HemsConfig& config) const;
};

using Policy = std::function<DispatchAction(const EnvState&)>;

/// Throws InfeasibleAction naming the step.
RolloutResult rollout(const HemsConfig& config, const Policy& policy, std::span<const double> pv_kw,
                      std::span<const double> base_load_kw);

/// Requests from per-appliance power (kW): a slot is requested where power
/// exceeds 25% of rated power. Throws UnknownDevice when a device has no
/// series.
std::vector<DeviceSpec> derive_device_requests(const std::map<std::string, std::vector<double>>& device_kw,
                                               std::vector<DeviceSpec> devices);

struct Scenario {
  HemsConfig config;
  std::vector<double> pv_kw;
  std::vector<double> base_load_kw;
};

/// JSON scenario: ESS and price settings, devices, and either inline
/// trajectories or a CSV file (columns pv_kw, base_load_kw, one per device)
/// resolved relative to the scenario file.
Scenario load_scenario(const std::filesystem::path& path);

/// Aggregate checks over many uniformly random feasible rollouts.
struct RandomRolloutStats {
  std::size_t rollouts = 0;
  std::size_t soc_violations = 0;
  std::size_t wait_violations = 0;
  std::size_t unserved = 0;
  double max_energy_error_kwh = 0.0;
  std::vector<double> profits;  // per rollout, index order

  friend bool operator==(const RandomRolloutStats&, const RandomRolloutStats&) = default;
};

/// Rollout i draws from Rng(seed + i), so results do not depend on policy.
RandomRolloutStats random_rollouts(const HemsConfig& config, std::span<const double> pv_kw,
                                   std::span<const double> base_load_kw, std::size_t count, std::uint64_t seed,
                                   ExecPolicy policy = ExecPolicy::parallel, int jobs = 0);

}  // namespace seqdispatch
