#include "seqdispatch/hems_env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "seqdispatch/error.hpp"
#include "seqdispatch/rng.hpp"

namespace seqdispatch {

namespace {

constexpr double kSocTolerance = 1e-9;
constexpr double kRequestThreshold = 0.25;

const DeviceRequest& head_request(const DeviceSpec& spec, const DeviceState& d) {
  return spec.requests[static_cast<std::size_t>(d.next_request - d.queue_len)];
}

void absorb_arrivals(const HemsConfig& config, EnvState& s) {
  for (std::size_t l = 0; l < config.devices.size(); ++l) {
    const auto& reqs = config.devices[l].requests;
    DeviceState& d = s.devices[l];
    while (static_cast<std::size_t>(d.next_request) < reqs.size() &&
           reqs[static_cast<std::size_t>(d.next_request)].arrival <= s.t) {
      if (static_cast<std::size_t>(d.queue_len) >= kMaxQueue) {
        throw Error(ErrorCode::ValidationError,
                    "device '" + config.devices[l].name + "' has more than " + std::to_string(kMaxQueue) +
                        " requests waiting at step " + std::to_string(s.t));
      }
      ++d.next_request;
      ++d.queue_len;
    }
  }
}

// Per-device switching constraints: bits that must be on and bits that may be on.
void device_masks(const HemsConfig& config, const EnvState& s, std::uint32_t& must_on, std::uint32_t& may_on) {
  must_on = 0;
  may_on = 0;
  for (std::size_t l = 0; l < config.devices.size(); ++l) {
    const DeviceState& d = s.devices[l];
    const std::uint32_t bit = 1U << l;
    if (d.running_remaining > 0) {
      must_on |= bit;
      may_on |= bit;
    } else if (d.queue_len > 0) {
      may_on |= bit;
      const DeviceSpec& spec = config.devices[l];
      if (d.head_age >= spec.max_wait || s.t >= config.horizon - head_request(spec, d).length) must_on |= bit;
    }
  }
}

bool soc_ok(const HemsConfig& config, double soc, int q) {
  const double next = soc - q * config.soc_step();
  return next >= config.soc_min - kSocTolerance && next <= config.soc_max + kSocTolerance;
}

std::vector<double> parse_number_list(const std::string& line, std::size_t row) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
    } catch (const std::exception&) {
      throw Error(ErrorCode::ParseError, "trajectory row " + std::to_string(row) + ": bad number '" + cell + "'");
    }
  }
  return out;
}

}  // namespace

std::vector<DeviceRequest> merge_request_slots(std::span<const std::uint8_t> slots) {
  std::vector<DeviceRequest> out;
  for (std::size_t t = 0; t < slots.size(); ++t) {
    if (slots[t] == 0) continue;
    if (t > 0 && slots[t - 1] != 0) {
      ++out.back().length;
    } else {
      out.push_back({static_cast<int>(t), 1});
    }
  }
  return out;
}

void DeviceSpec::set_request_slots(std::vector<std::uint8_t> slots) {
  request_slots = std::move(slots);
  requests = merge_request_slots(request_slots);
}

void HemsConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw Error(ErrorCode::ValidationError, msg); };
  if (!(ess_capacity_kwh > 0.0) || !(charge_kw > 0.0)) fail("ESS capacity and charge power must be positive");
  if (!(soc_min >= 0.0 && soc_min < soc_max && soc_max <= 1.0)) fail("SOC bounds must satisfy 0 <= min < max <= 1");
  if (!(step_hours > 0.0)) fail("step duration must be positive");
  if (horizon < 1) fail("horizon must be >= 1");
  if (initial_soc < soc_min || initial_soc > soc_max) fail("initial SOC outside the SOC bounds");
  const auto T = static_cast<std::size_t>(horizon);
  if (price_buy.size() != T || price_sell.size() != T) fail("price arrays must have one entry per step");
  if (devices.size() > kMaxDevices) fail("at most " + std::to_string(kMaxDevices) + " devices are supported");
  for (const auto& d : devices) {
    if (!(d.rated_kw >= 0.0)) fail("device '" + d.name + "' has negative rated power");
    if (d.max_wait < 0) fail("device '" + d.name + "' has negative max_wait");
    if (!d.deferrable && d.max_wait != 0) fail("non-deferrable device '" + d.name + "' must have max_wait 0");
    if (!d.request_slots.empty() && d.request_slots.size() != T) {
      fail("device '" + d.name + "' request slots do not span the horizon");
    }
    if (d.requests != merge_request_slots(d.request_slots)) {
      fail("device '" + d.name + "' requests are out of sync with its request slots");
    }
  }
}

std::vector<std::string> HemsConfig::warnings() const {
  std::vector<std::string> out;
  for (std::size_t t = 0; t < price_buy.size() && t < price_sell.size(); ++t) {
    if (price_sell[t] > price_buy[t]) out.push_back("sell price exceeds buy price at step " + std::to_string(t));
  }
  return out;
}

void set_peak_offpeak_prices(HemsConfig& config, double peak_buy, double offpeak_buy, double peak_start_hour,
                             double peak_end_hour, double sell_ratio) {
  const auto T = static_cast<std::size_t>(std::max(config.horizon, 0));
  config.price_buy.resize(T);
  config.price_sell.resize(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double hour = std::fmod(static_cast<double>(t) * config.step_hours, 24.0);
    const bool peak = hour >= peak_start_hour && hour < peak_end_hour;
    config.price_buy[t] = peak ? peak_buy : offpeak_buy;
    config.price_sell[t] = sell_ratio * config.price_buy[t];
  }
}

std::size_t action_index(const DispatchAction& a, std::size_t num_devices) noexcept {
  return (static_cast<std::size_t>(a.q + 1) << num_devices) + a.device_on;
}

DispatchAction action_from_index(std::size_t index, std::size_t num_devices) noexcept {
  return {static_cast<int>(index >> num_devices) - 1,
          static_cast<std::uint32_t>(index & ((std::size_t{1} << num_devices) - 1))};
}

EnvState initial_state(const HemsConfig& config) {
  EnvState s;
  s.t = 0;
  s.soc = config.initial_soc;
  absorb_arrivals(config, s);
  return s;
}

std::optional<std::string> infeasibility(const HemsConfig& config, const EnvState& s, const DispatchAction& a) {
  if (s.t < 0 || s.t >= config.horizon) return "step " + std::to_string(s.t) + " is outside the horizon";
  if (a.q < -1 || a.q > 1) return "ESS command must be -1, 0 or +1";
  if ((a.device_on >> config.devices.size()) != 0) return "switch bit set for a device that does not exist";
  if (!soc_ok(config, s.soc, a.q)) {
    return "SOC " + std::to_string(s.soc - a.q * config.soc_step()) + " would leave [" +
           std::to_string(config.soc_min) + ", " + std::to_string(config.soc_max) + "]";
  }
  std::uint32_t must_on = 0, may_on = 0;
  device_masks(config, s, must_on, may_on);
  for (std::size_t l = 0; l < config.devices.size(); ++l) {
    const std::uint32_t bit = 1U << l;
    if ((must_on & bit) != 0 && !a.on(l)) {
      return "device '" + config.devices[l].name + "' must be on (running or overdue)";
    }
    if ((may_on & bit) == 0 && a.on(l)) return "device '" + config.devices[l].name + "' has no pending request";
  }
  return std::nullopt;
}

StepOutcome step(const HemsConfig& config, const EnvState& s, const DispatchAction& a, double pv_kw,
                 double base_load_kw) {
  if (auto why = infeasibility(config, s, a)) {
    throw Error(ErrorCode::InfeasibleAction, "step " + std::to_string(s.t) + ": " + *why);
  }
  StepOutcome out;
  EnvState& n = out.next_state;
  n = s;
  double soc = s.soc - a.q * config.soc_step();
  n.soc = std::clamp(soc, config.soc_min, config.soc_max);

  double load = base_load_kw;
  for (std::size_t l = 0; l < config.devices.size(); ++l) {
    const DeviceSpec& spec = config.devices[l];
    DeviceState& d = n.devices[l];
    if (a.on(l)) {
      load += spec.rated_kw;
      if (d.running_remaining == 0) {
        out.started_wait[l] = d.head_age;
        d.running_remaining = static_cast<std::int16_t>(head_request(spec, d).length);
        --d.queue_len;
        d.head_age = 0;
      }
      --d.running_remaining;
    } else if (d.queue_len > 0) {
      ++d.head_age;
    }
  }

  out.ess_kw = config.charge_kw * a.q;
  out.load_kw = load;
  out.net_kw = out.ess_kw + pv_kw - load;
  out.sell_indicator = out.net_kw > 0.0 ? 1 : 0;
  const std::size_t t = static_cast<std::size_t>(s.t);
  const double price = out.sell_indicator == 1 ? config.price_sell[t] : config.price_buy[t];
  out.reward = out.net_kw * config.step_hours * price;

  n.t = s.t + 1;
  if (n.t < config.horizon) absorb_arrivals(config, n);
  return out;
}

void feasible_action_indices(const HemsConfig& config, const EnvState& s, std::vector<std::size_t>& out) {
  out.clear();
  if (s.t < 0 || s.t >= config.horizon) return;
  const std::size_t D = config.devices.size();
  std::uint32_t must_on = 0, may_on = 0;
  device_masks(config, s, must_on, may_on);
  for (int q = -1; q <= 1; ++q) {
    if (!soc_ok(config, s.soc, q)) continue;
    for (std::uint32_t bits = 0; bits < (1U << D); ++bits) {
      if ((bits & must_on) != must_on || (bits & ~may_on) != 0) continue;
      out.push_back(action_index({q, bits}, D));
    }
  }
}

std::vector<DispatchAction> enumerate_actions(const HemsConfig& config, const EnvState& s) {
  std::vector<std::size_t> idx;
  feasible_action_indices(config, s, idx);
  std::vector<DispatchAction> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(action_from_index(i, config.devices.size()));
  return out;
}

RolloutResult rollout(const HemsConfig& config, const Policy& policy, std::span<const double> pv_kw,
                      std::span<const double> base_load_kw) {
  const auto T = static_cast<std::size_t>(config.horizon);
  if (pv_kw.size() != T || base_load_kw.size() != T) {
    throw Error(ErrorCode::LengthMismatch, "trajectories must have one entry per step");
  }
  RolloutResult r;
  r.trace.reserve(T);
  EnvState s = initial_state(config);
  for (std::size_t t = 0; t < T; ++t) {
    const DispatchAction a = policy(s);
    StepRecord rec{s.t, s.soc, a, step(config, s, a, pv_kw[t], base_load_kw[t])};
    r.total_profit += rec.outcome.reward;
    s = rec.outcome.next_state;
    r.trace.push_back(rec);
  }
  r.final_soc = s.soc;
  for (std::size_t l = 0; l < config.devices.size(); ++l) {
    r.unserved_requests += s.devices[l].queue_len;
    r.cut_off_requests += s.devices[l].running_remaining > 0 ? 1 : 0;
    r.unserved_requests += static_cast<int>(config.devices[l].requests.size()) - s.devices[l].next_request;
  }
  return r;
}

void RolloutResult::write_trace_csv(const std::filesystem::path& path, const HemsConfig& config) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.precision(17);
  out << "t,soc,q";
  for (const auto& d : config.devices) out << ",G_" << d.name;
  out << ",net_kw,alpha,reward\n";
  for (const auto& rec : trace) {
    out << rec.t << ',' << rec.soc << ',' << rec.action.q;
    for (std::size_t l = 0; l < config.devices.size(); ++l) out << ',' << (rec.action.on(l) ? 1 : 0);
    out << ',' << rec.outcome.net_kw << ',' << rec.outcome.sell_indicator << ',' << rec.outcome.reward << '\n';
  }
}

std::vector<DeviceSpec> derive_device_requests(const std::map<std::string, std::vector<double>>& device_kw,
                                               std::vector<DeviceSpec> devices) {
  for (DeviceSpec& d : devices) {
    const auto it = device_kw.find(d.name);
    if (it == device_kw.end()) throw Error(ErrorCode::UnknownDevice, "no power series for device '" + d.name + "'");
    std::vector<std::uint8_t> slots(it->second.size());
    for (std::size_t t = 0; t < slots.size(); ++t) slots[t] = it->second[t] > kRequestThreshold * d.rated_kw ? 1 : 0;
    d.set_request_slots(std::move(slots));
  }
  return devices;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read scenario '" + path.string() + "'");
  Scenario sc;
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.value("schema_version", 1) != 1) throw Error(ErrorCode::ValidationError, "unsupported scenario schema");
    HemsConfig& c = sc.config;
    if (j.contains("ess")) {
      const auto& e = j["ess"];
      c.ess_capacity_kwh = e.value("capacity_kwh", c.ess_capacity_kwh);
      c.charge_kw = e.value("charge_kw", c.charge_kw);
      c.soc_min = e.value("soc_min", c.soc_min);
      c.soc_max = e.value("soc_max", c.soc_max);
      c.initial_soc = e.value("initial_soc", c.initial_soc);
    }
    c.step_hours = j.value("step_hours", c.step_hours);
    c.horizon = j.value("horizon", c.horizon);
    const auto& prices = j.value("prices", nlohmann::json::object());
    if (prices.contains("buy")) {
      c.price_buy = prices.at("buy").get<std::vector<double>>();
      c.price_sell = prices.at("sell").get<std::vector<double>>();
    } else {
      set_peak_offpeak_prices(c, prices.value("peak_buy", 0.20), prices.value("offpeak_buy", 0.10),
                              prices.value("peak_start_hour", 16.0), prices.value("peak_end_hour", 22.0),
                              prices.value("sell_ratio", 0.5));
    }
    for (const auto& d : j.value("devices", nlohmann::json::array())) {
      DeviceSpec spec;
      spec.name = d.at("name").get<std::string>();
      spec.rated_kw = d.at("rated_kw").get<double>();
      spec.deferrable = d.value("deferrable", true);
      spec.max_wait = d.value("max_wait", 0);
      c.devices.push_back(std::move(spec));
    }

    std::map<std::string, std::vector<double>> device_kw;
    const auto& traj = j.at("trajectory");
    if (traj.contains("file")) {
      const auto file = path.parent_path() / traj.at("file").get<std::string>();
      std::ifstream tf(file);
      if (!tf) throw Error(ErrorCode::IoError, "cannot read trajectory '" + file.string() + "'");
      std::string line;
      std::getline(tf, line);
      std::vector<std::string> header;
      {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
      }
      std::map<std::string, std::vector<double>> cols;
      std::size_t row = 1;
      while (std::getline(tf, line)) {
        ++row;
        if (line.empty()) continue;
        const auto vals = parse_number_list(line, row);
        if (vals.size() != header.size()) {
          throw Error(ErrorCode::ParseError, "trajectory row " + std::to_string(row) + " has the wrong width");
        }
        for (std::size_t i = 0; i < header.size(); ++i) cols[header[i]].push_back(vals[i]);
      }
      for (const char* need : {"pv_kw", "base_load_kw"}) {
        if (!cols.count(need)) throw Error(ErrorCode::MissingColumn, std::string("trajectory lacks column ") + need);
      }
      sc.pv_kw = cols["pv_kw"];
      sc.base_load_kw = cols["base_load_kw"];
      for (const auto& d : c.devices) {
        if (cols.count(d.name)) device_kw[d.name] = cols[d.name];
      }
    } else {
      sc.pv_kw = traj.at("pv_kw").get<std::vector<double>>();
      sc.base_load_kw = traj.at("base_load_kw").get<std::vector<double>>();
      if (traj.contains("device_kw")) device_kw = traj["device_kw"].get<std::map<std::string, std::vector<double>>>();
    }
    c.devices = derive_device_requests(device_kw, std::move(c.devices));
    c.validate();
    if (sc.pv_kw.size() != static_cast<std::size_t>(c.horizon) ||
        sc.base_load_kw.size() != static_cast<std::size_t>(c.horizon)) {
      throw Error(ErrorCode::ValidationError, "trajectory length does not match the horizon");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, "scenario '" + path.string() + "': " + e.what());
  }
  return sc;
}

RandomRolloutStats random_rollouts(const HemsConfig& config, std::span<const double> pv_kw,
                                   std::span<const double> base_load_kw, std::size_t count, std::uint64_t seed,
                                   ExecPolicy policy, int jobs) {
  config.validate();
  const auto T = static_cast<std::size_t>(config.horizon);
  if (pv_kw.size() != T || base_load_kw.size() != T) {
    throw Error(ErrorCode::LengthMismatch, "trajectories must have one entry per step");
  }
  struct One {
    bool soc_violation = false;
    bool wait_violation = false;
    int unserved = 0;
    double energy_error = 0.0;
    double profit = 0.0;
  };
  std::vector<One> results(count);
  for_each_index(policy, count, jobs, [&](std::size_t i) {
    Rng rng(seed + i);
    std::vector<std::size_t> feasible;
    EnvState s = initial_state(config);
    One& r = results[i];
    double ess_kwh = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      feasible_action_indices(config, s, feasible);
      if (feasible.empty()) throw Error(ErrorCode::NoFeasibleAction, "random rollout stuck at step " + std::to_string(t));
      const DispatchAction a = action_from_index(feasible[rng.below(feasible.size())], config.devices.size());
      const StepOutcome o = step(config, s, a, pv_kw[t], base_load_kw[t]);
      r.profit += o.reward;
      ess_kwh += o.ess_kw * config.step_hours;
      if (o.next_state.soc < config.soc_min || o.next_state.soc > config.soc_max) r.soc_violation = true;
      for (std::size_t l = 0; l < config.devices.size(); ++l) {
        if (o.started_wait[l] > config.devices[l].max_wait) r.wait_violation = true;
      }
      s = o.next_state;
    }
    for (std::size_t l = 0; l < config.devices.size(); ++l) {
      r.unserved += s.devices[l].queue_len;
      r.unserved += static_cast<int>(config.devices[l].requests.size()) - s.devices[l].next_request;
    }
    r.energy_error = std::abs(ess_kwh - (config.initial_soc - s.soc) * config.ess_capacity_kwh);
  });
  RandomRolloutStats stats;
  stats.rollouts = count;
  stats.profits.reserve(count);
  for (const One& r : results) {
    stats.soc_violations += r.soc_violation ? 1 : 0;
    stats.wait_violations += r.wait_violation ? 1 : 0;
    stats.unserved += static_cast<std::size_t>(r.unserved);
    stats.max_energy_error_kwh = std::max(stats.max_energy_error_kwh, r.energy_error);
    stats.profits.push_back(r.profit);
  }
  return stats;
}

}  // namespace seqdispatch
