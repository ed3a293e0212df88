#include "seqdispatch/q_dispatch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <json.hpp>

#include "seqdispatch/detail/binary_io.hpp"
#include "seqdispatch/error.hpp"

namespace seqdispatch {

namespace {

constexpr std::string_view kQTableMagic = "SQDQTAB1";
constexpr std::uint32_t kQTableVersion = 1;

std::uint8_t to_byte(int v, const char* what) {
  if (v < 0 || v > 255) throw Error(ErrorCode::ValidationError, std::string(what) + " does not fit the state key");
  return static_cast<std::uint8_t>(v);
}

}  // namespace

void QLearnConfig::validate() const {
  const auto fail = [](const std::string& msg) { throw Error(ErrorCode::ValidationError, msg); };
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0, 1]");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) fail("learning_rate must be in (0, 1]");
  if (!(epsilon_initial >= 0.0 && epsilon_initial <= 1.0)) fail("epsilon_initial must be in [0, 1]");
  if (!(epsilon_floor >= 0.0 && epsilon_floor <= 1.0)) fail("epsilon_floor must be in [0, 1]");
  if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) fail("epsilon_decay must be in (0, 1]");
  if (soc_bins < 1 || soc_bins > 255) fail("soc_bins must be in [1, 255]");
}

double QLearnConfig::epsilon(std::size_t episode) const noexcept {
  return std::max(epsilon_floor, epsilon_initial * std::pow(epsilon_decay, static_cast<double>(episode)));
}

std::size_t QKeyHash::operator()(const QKey& k) const noexcept {
  std::uint64_t h = 14695981039346656037ULL;
  for (std::uint8_t b : k.bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  return static_cast<std::size_t>(h);
}

int soc_bin(double soc, const HemsConfig& config, std::size_t bins) noexcept {
  const double x = (soc - config.soc_min) / (config.soc_max - config.soc_min) * static_cast<double>(bins);
  const int b = static_cast<int>(std::floor(x + 1e-9));
  return std::clamp(b, 0, static_cast<int>(bins) - 1);
}

QKey discretize(const EnvState& state, const HemsConfig& config, std::size_t bins) {
  QKey k;
  k.bytes[0] = to_byte(state.t, "step index");
  k.bytes[1] = static_cast<std::uint8_t>(soc_bin(state.soc, config, bins));
  for (std::size_t l = 0; l < config.devices.size(); ++l) {
    const DeviceState& d = state.devices[l];
    k.bytes[2 + 3 * l] = to_byte(d.running_remaining, "run length");
    k.bytes[3 + 3 * l] = to_byte(d.queue_len, "queue length");
    k.bytes[4 + 3 * l] = to_byte(std::min<int>(d.head_age, config.devices[l].max_wait), "waiting age");
  }
  return k;
}

QTable::Entry& QTable::entry(const QKey& key) {
  auto [it, inserted] = entries_.try_emplace(key);
  if (inserted) {
    it->second.q.assign(num_actions_, 0.0);
    it->second.visits.assign(num_actions_, 0);
  }
  return it->second;
}

double QTable::value(const QKey& key, std::size_t action) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? 0.0 : it->second.q[action];
}

std::uint32_t QTable::visits(const QKey& key, std::size_t action) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? 0 : it->second.visits[action];
}

double QTable::max_value(const QKey& key, std::span<const std::size_t> actions) const {
  if (actions.empty()) return 0.0;
  const auto it = entries_.find(key);
  if (it == entries_.end()) return 0.0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t a : actions) best = std::max(best, it->second.q[a]);
  return best;
}

double& QTable::at(const QKey& key, std::size_t action) { return entry(key).q.at(action); }

void QTable::add_visit(const QKey& key, std::size_t action) { ++entry(key).visits.at(action); }

std::vector<QKey> QTable::keys() const {
  std::vector<QKey> out;
  out.reserve(entries_.size());
  for (const auto& [k, _] : entries_) out.push_back(k);
  std::sort(out.begin(), out.end());
  return out;
}

QTable::Summary QTable::summary() const {
  Summary s;
  s.states = entries_.size();
  bool first = true;
  for (const auto& [k, e] : entries_) {
    for (std::size_t a = 0; a < num_actions_; ++a) {
      s.total_visits += e.visits[a];
      if (e.visits[a] > 0) ++s.visited_pairs;
      if (first) {
        s.min_value = s.max_value = e.q[a];
        first = false;
      }
      s.min_value = std::min(s.min_value, e.q[a]);
      s.max_value = std::max(s.max_value, e.q[a]);
    }
  }
  return s;
}

std::string QTable::summary_json() const {
  const Summary s = summary();
  nlohmann::ordered_json j;
  j["states"] = s.states;
  j["actions"] = num_actions_;
  j["soc_bins"] = soc_bins_;
  j["visited_pairs"] = s.visited_pairs;
  j["total_visits"] = s.total_visits;
  j["min_value"] = s.min_value;
  j["max_value"] = s.max_value;
  return j.dump(2);
}

void QTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.write(kQTableMagic.data(), static_cast<std::streamsize>(kQTableMagic.size()));
  detail::write_u32(out, kQTableVersion);
  detail::write_u32(out, static_cast<std::uint32_t>(QKey{}.bytes.size()));
  detail::write_u64(out, num_actions_);
  detail::write_u64(out, soc_bins_);
  detail::write_u64(out, entries_.size());
  for (const QKey& k : keys()) {
    out.write(reinterpret_cast<const char*>(k.bytes.data()), static_cast<std::streamsize>(k.bytes.size()));
    const Entry& e = entries_.at(k);
    for (double v : e.q) detail::write_f64(out, v);
    for (std::uint32_t v : e.visits) detail::write_u32(out, v);
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

QTable QTable::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
  detail::expect_magic(in, kQTableMagic, "Q table");
  if (detail::read_u32(in) != kQTableVersion) throw Error(ErrorCode::IoError, "unsupported Q table version");
  if (detail::read_u32(in) != QKey{}.bytes.size()) throw Error(ErrorCode::IoError, "Q table key layout differs");
  const auto actions = detail::read_u64(in);
  const auto bins = detail::read_u64(in);
  const auto count = detail::read_u64(in);
  if (actions == 0 || actions > 4096) throw Error(ErrorCode::IoError, "Q table action count out of range");
  QTable t(actions, bins);
  for (std::uint64_t i = 0; i < count; ++i) {
    QKey k;
    if (!in.read(reinterpret_cast<char*>(k.bytes.data()), static_cast<std::streamsize>(k.bytes.size()))) {
      throw Error(ErrorCode::IoError, "truncated Q table");
    }
    Entry& e = t.entry(k);
    for (auto& v : e.q) v = detail::read_f64(in);
    for (auto& v : e.visits) v = detail::read_u32(in);
  }
  return t;
}

bool operator==(const QTable& a, const QTable& b) {
  if (a.num_actions_ != b.num_actions_ || a.soc_bins_ != b.soc_bins_ || a.entries_.size() != b.entries_.size()) {
    return false;
  }
  for (const auto& [k, e] : a.entries_) {
    const auto it = b.entries_.find(k);
    if (it == b.entries_.end() || it->second.q != e.q || it->second.visits != e.visits) return false;
  }
  return true;
}

std::size_t select_action(const QTable& table, const QKey& key, std::span<const std::size_t> feasible,
                          double epsilon, Rng& rng) {
  if (feasible.empty()) throw Error(ErrorCode::NoFeasibleAction, "no feasible action at step " + std::to_string(key.t()));
  if (epsilon > 0.0 && rng.uniform() < epsilon) return feasible[rng.below(feasible.size())];
  std::size_t best = feasible.front();
  double best_q = table.value(key, best);
  for (std::size_t a : feasible.subspan(1)) {
    const double q = table.value(key, a);
    if (q > best_q || (q == best_q && a < best)) {
      best = a;
      best_q = q;
    }
  }
  return best;
}

double q_update(QTable& table, const QKey& key, std::size_t action, double reward, const QKey& next_key,
                std::span<const std::size_t> next_feasible, double learning_rate, double gamma) {
  const double target = reward + gamma * table.max_value(next_key, next_feasible);
  double& q = table.at(key, action);
  q = (1.0 - learning_rate) * q + learning_rate * target;
  return q;
}

OfflineResult train_offline(const QLearnConfig& config, const HemsConfig& env, std::span<const double> pv_kw,
                            std::span<const double> base_load_kw) {
  config.validate();
  env.validate();
  const auto T = static_cast<std::size_t>(env.horizon);
  if (pv_kw.size() != T || base_load_kw.size() != T) {
    throw Error(ErrorCode::LengthMismatch, "trajectories must have one entry per step");
  }
  OfflineResult r;
  r.table = QTable(env.num_actions(), config.soc_bins);
  r.episode_profit.reserve(config.episodes);
  Rng rng(config.seed);
  std::vector<std::size_t> feasible, next_feasible;
  for (std::size_t e = 0; e < config.episodes; ++e) {
    const double eps = config.epsilon(e);
    EnvState s = initial_state(env);
    QKey key = discretize(s, env, config.soc_bins);
    feasible_action_indices(env, s, feasible);
    double profit = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t a = select_action(r.table, key, feasible, eps, rng);
      const StepOutcome o = step(env, s, action_from_index(a, env.devices.size()), pv_kw[t], base_load_kw[t]);
      profit += o.reward;
      const EnvState& ns = o.next_state;
      QKey next_key;
      if (t + 1 < T) {
        next_key = discretize(ns, env, config.soc_bins);
        feasible_action_indices(env, ns, next_feasible);
      } else {
        next_feasible.clear();
      }
      q_update(r.table, key, a, o.reward, next_key, next_feasible, config.learning_rate, config.gamma);
      r.table.add_visit(key, a);
      s = ns;
      key = next_key;
      std::swap(feasible, next_feasible);
    }
    r.episode_profit.push_back(profit);
  }
  r.greedy = test_online(r.table, env, pv_kw, base_load_kw);
  r.predicted_profit = r.greedy.total_profit;
  return r;
}

RolloutResult test_online(const QTable& table, const HemsConfig& env, std::span<const double> pv_kw,
                          std::span<const double> base_load_kw) {
  std::vector<std::size_t> feasible;
  Rng unused(0);
  const Policy greedy = [&](const EnvState& s) {
    feasible_action_indices(env, s, feasible);
    const QKey key = discretize(s, env, table.soc_bins());
    return action_from_index(select_action(table, key, feasible, 0.0, unused), env.devices.size());
  };
  return rollout(env, greedy, pv_kw, base_load_kw);
}

double max_step_reward(const HemsConfig& env, std::span<const double> pv_kw, std::span<const double> base_load_kw) {
  double devices = 0.0;
  for (const auto& d : env.devices) devices += d.rated_kw;
  double best = 0.0;
  for (std::size_t t = 0; t < pv_kw.size() && t < base_load_kw.size(); ++t) {
    const double net = std::abs(pv_kw[t] - base_load_kw[t]) + env.charge_kw + devices;
    best = std::max(best, net * env.step_hours * std::max(env.price_buy[t], env.price_sell[t]));
  }
  return best;
}

}  // namespace seqdispatch
