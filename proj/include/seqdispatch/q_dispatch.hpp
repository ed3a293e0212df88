#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqdispatch/hems_env.hpp"
#include "seqdispatch/rng.hpp"

namespace seqdispatch {

struct QLearnConfig {
  std::size_t episodes = 7000;
  double gamma = 0.99;
  double learning_rate = 0.95;
  double epsilon_initial = 0.1;
  double epsilon_decay = 0.999;  // per episode
  double epsilon_floor = 0.01;
  std::size_t soc_bins = 16;
  std::uint64_t seed = 1;

  void validate() const;  // throws ValidationError
  double epsilon(std::size_t episode) const noexcept;
};

/// Packed discretized state. Byte layout: t, soc_bin, then for each device
/// (running_remaining, queue_len, head_age); unused device slots are zero.
struct QKey {
  std::array<std::uint8_t, 2 + 3 * kMaxDevices> bytes{};

  int t() const noexcept { return bytes[0]; }
  int soc_bin() const noexcept { return bytes[1]; }
  friend bool operator==(const QKey&, const QKey&) = default;
  friend auto operator<=>(const QKey&, const QKey&) = default;
};

struct QKeyHash {
  std::size_t operator()(const QKey& k) const noexcept;
};

/// floor((S - S_min) / (S_max - S_min) * bins), clamped to [0, bins - 1].
int soc_bin(double soc, const HemsConfig& config, std::size_t bins) noexcept;
QKey discretize(const EnvState& state, const HemsConfig& config, std::size_t bins);

/// Q values and visit counts per (key, canonical action index). Unseen
/// entries read as zero.
class QTable {
 public:
  QTable() = default;
  QTable(std::size_t num_actions, std::size_t soc_bins) : num_actions_(num_actions), soc_bins_(soc_bins) {}

  std::size_t num_actions() const noexcept { return num_actions_; }
  std::size_t soc_bins() const noexcept { return soc_bins_; }
  std::size_t num_states() const noexcept { return entries_.size(); }

  double value(const QKey& key, std::size_t action) const;
  std::uint32_t visits(const QKey& key, std::size_t action) const;
  /// Max over `actions`; 0 for an empty list.
  double max_value(const QKey& key, std::span<const std::size_t> actions) const;

  double& at(const QKey& key, std::size_t action);
  void add_visit(const QKey& key, std::size_t action);

  /// Sorted by key, for deterministic output.
  std::vector<QKey> keys() const;

  struct Summary {
    std::size_t states = 0;
    std::size_t visited_pairs = 0;
    std::uint64_t total_visits = 0;
    double min_value = 0.0;
    double max_value = 0.0;
  };
  Summary summary() const;
  std::string summary_json() const;

  /// Layout (little-endian): magic "SQDQTAB1", u32 version, u32 key bytes,
  /// u64 actions, u64 soc bins, u64 entries, then per entry in key order the
  /// key bytes, `actions` f64 values and `actions` u32 visit counts.
  void save(const std::filesystem::path& path) const;
  static QTable load(const std::filesystem::path& path);

  friend bool operator==(const QTable& a, const QTable& b);

 private:
  struct Entry {
    std::vector<double> q;
    std::vector<std::uint32_t> visits;
  };
  Entry& entry(const QKey& key);

  std::size_t num_actions_ = 0;
  std::size_t soc_bins_ = 0;
  std::unordered_map<QKey, Entry, QKeyHash> entries_;
};

/// Explores uniformly over `feasible` with probability epsilon, otherwise
/// takes the argmax, ties to the lowest index. Throws NoFeasibleAction.
std::size_t select_action(const QTable& table, const QKey& key, std::span<const std::size_t> feasible,
                          double epsilon, Rng& rng);

/// Q <- (1 - lr) Q + lr (r + gamma max_a' Q(next, a')); an empty
/// `next_feasible` marks the terminal step. Returns the new value.
double q_update(QTable& table, const QKey& key, std::size_t action, double reward, const QKey& next_key,
                std::span<const std::size_t> next_feasible, double learning_rate, double gamma);

struct OfflineResult {
  QTable table;
  std::vector<double> episode_profit;  // epsilon-greedy training rollouts
  double predicted_profit = 0.0;       // greedy rollout on the forecasts
  RolloutResult greedy;
};

/// Epsilon-greedy Q-learning over full-horizon episodes on the forecast
/// trajectories.
OfflineResult train_offline(const QLearnConfig& config, const HemsConfig& env, std::span<const double> pv_kw,
                            std::span<const double> base_load_kw);

/// Frozen greedy rollout: argmax over the actions feasible in the visited
/// state.
RolloutResult test_online(const QTable& table, const HemsConfig& env, std::span<const double> pv_kw,
                          std::span<const double> base_load_kw);

/// Upper bound on |reward| of any single step: the largest |net| any action
/// can produce at step t times that step's higher price.
double max_step_reward(const HemsConfig& env, std::span<const double> pv_kw, std::span<const double> base_load_kw);

}  // namespace seqdispatch
