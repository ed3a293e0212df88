#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "seqdispatch/hems_env.hpp"
#include "seqdispatch/lstm_baseline.hpp"
#include "seqdispatch/metrics.hpp"
#include "seqdispatch/q_dispatch.hpp"
#include "seqdispatch/seq2seq.hpp"
#include "seqdispatch/synthetic.hpp"
#include "seqdispatch/timeseries.hpp"
#include "seqdispatch/trainer.hpp"

namespace seqdispatch {

struct DispatchSettings {
  std::size_t num_days = 40;      // final full days of the test partition
  std::vector<std::size_t> days;  // explicit picks among those candidates; overrides num_days
  std::size_t repetitions = 10;
  QLearnConfig qlearn;
  HemsConfig hems;  // horizon and step come from the data; devices carry no requests yet
  double peak_buy = 0.20;
  double offpeak_buy = 0.10;
  double peak_start_hour = 16.0;
  double peak_end_hour = 22.0;
  double sell_ratio = 0.5;
  std::string pv_channel = "pv";
  std::string total_channel = "total";
  std::vector<std::string> forecasters{"seq2seq", "lstm", "varma", "persistence", "biased_pv50", "identity"};
  double biased_pv_scale = 0.5;
};

/// Everything one end-to-end run needs. Loaded from a versioned JSON file;
/// relative paths resolve against the file's directory.
struct ExperimentConfig {
  static constexpr int kSchemaVersion = 1;

  std::uint64_t seed = 42;
  int jobs = 0;
  std::filesystem::path data_path;  // empty: <output_dir>/synthetic.csv
  std::filesystem::path output_dir = "out";

  SyntheticConfig synthetic;
  std::int64_t resample_period = 600;
  std::size_t history_len = 144;
  std::size_t horizon_len = 6;
  SplitSpec split;
  std::vector<ChannelInfo> channels = synthetic_schema();

  Seq2SeqArch seq2seq_arch;
  TrainConfig seq2seq_train;
  LstmBaselineArch lstm_arch;
  TrainConfig lstm_train;
  std::size_t varma_p = 6;
  std::size_t varma_q = 2;
  std::size_t eval_stride = 6;
  std::size_t max_test_windows = 0;

  DispatchSettings dispatch;

  static ExperimentConfig from_json_text(const std::string& text, const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Throws ValidationError.
  void validate() const;

  std::filesystem::path data_file() const;
  std::filesystem::path out(const std::string& name) const { return output_dir / name; }
};

struct CommandResult {
  std::string message;
  bool cache_hit = false;
};

CommandResult cmd_synth_data(const ExperimentConfig& config);
CommandResult cmd_ingest(const ExperimentConfig& config);
CommandResult cmd_train_forecasters(const ExperimentConfig& config);
CommandResult cmd_dispatch(const ExperimentConfig& config);
CommandResult cmd_report(const ExperimentConfig& config);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);

/// One day of hourly (step-duration) trajectories in kW.
struct DayTrajectories {
  std::vector<double> pv_kw;
  std::vector<double> base_load_kw;
  std::map<std::string, std::vector<double>> device_kw;
};

/// Averages each group of `steps_per_hour` rows of a watt matrix and splits
/// it into PV, base load (total minus device channels, floored at 0) and
/// per-device series.
DayTrajectories hourly_trajectories(const Matrix& watts, std::span<const ChannelInfo> channels,
                                    std::size_t steps_per_hour, const DispatchSettings& settings);

struct DayDispatch {
  double predicted_profit = 0.0;  // mean over repetitions
  double actual_profit = 0.0;     // mean over repetitions
};

/// Offline Q-learning on `forecast`, frozen greedy test on `actual`,
/// averaged over repetitions with seeds seed + 0 .. seed + reps - 1.
DayDispatch dispatch_day(const DispatchSettings& settings, const DayTrajectories& forecast,
                         const DayTrajectories& actual, std::uint64_t seed);

/// Environment for one day with requests derived from `traj`.
HemsConfig day_environment(const DispatchSettings& settings, const DayTrajectories& traj);

struct OperationRow {
  std::size_t day = 0;
  std::string date;
  std::string forecaster;
  double predicted_profit = 0.0;
  double actual_profit = 0.0;
  double optimal_profit = 0.0;
};

struct OperationReport {
  std::vector<OperationRow> rows;

  void write_csv(const std::filesystem::path& path) const;
  static OperationReport read_csv(const std::filesystem::path& path);

  struct ForecasterSummary {
    std::size_t days = 0;
    double mean_predicted = 0.0;
    double mean_actual = 0.0;
    double mean_optimal = 0.0;
    double mean_abs_gap = 0.0;  // mean |predicted - actual|
    double max_abs_gap = 0.0;
  };
  std::map<std::string, ForecasterSummary> summarize() const;
};

}  // namespace seqdispatch
