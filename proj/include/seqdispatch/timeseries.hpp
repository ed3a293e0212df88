#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "seqdispatch/matrix.hpp"

namespace seqdispatch {

enum class ChannelKind { load, pv, total };

std::string_view to_string(ChannelKind kind) noexcept;
ChannelKind channel_kind_from_string(std::string_view s);

struct ChannelInfo {
  std::string name;
  ChannelKind kind = ChannelKind::load;

  friend bool operator==(const ChannelInfo&, const ChannelInfo&) = default;
};

/// Aligned multi-channel power series (watts) with a constant sampling period.
///
/// `values` is [steps x channels]; `missing` has the same layout and flags
/// imputed cells.
struct SeriesFrame {
  std::vector<ChannelInfo> channels;
  std::vector<std::int64_t> timestamps;  // epoch seconds
  std::int64_t period = 0;               // seconds
  Matrix values;
  std::vector<std::uint8_t> missing;

  std::size_t num_steps() const noexcept { return timestamps.size(); }
  std::size_t num_channels() const noexcept { return channels.size(); }
  std::size_t channel_index(std::string_view name) const;  // throws ChannelMismatch
  bool is_missing(std::size_t step, std::size_t channel) const noexcept {
    return !missing.empty() && missing[step * channels.size() + channel] != 0;
  }

  /// Throws if any structural invariant is broken.
  void validate() const;

  /// Rows [begin, end) as a new frame.
  SeriesFrame slice(std::size_t begin, std::size_t end) const;
};

/// ISO-8601 `YYYY-MM-DD[T ]HH:MM[:SS][Z]` (UTC) or integer epoch seconds.
std::int64_t parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t epoch_seconds);

/// Monday = 0 ... Sunday = 6.
int day_of_week(std::int64_t epoch_seconds) noexcept;

SeriesFrame load_csv(const std::filesystem::path& path, std::span<const ChannelInfo> schema);
void write_csv(const SeriesFrame& frame, const std::filesystem::path& path);

SeriesFrame resample_mean(const SeriesFrame& frame, std::int64_t target_period);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const noexcept { return end - begin; }
};

struct NormalizationParams {
  std::vector<std::string> channel_names;
  std::vector<double> min;
  std::vector<double> max;

  bool is_constant(std::size_t c) const noexcept { return max[c] == min[c]; }
  double range(std::size_t c) const noexcept { return max[c] - min[c]; }
  std::size_t num_channels() const noexcept { return min.size(); }

  double normalize(std::size_t c, double watts) const noexcept;
  double denormalize(std::size_t c, double value) const noexcept;

  friend bool operator==(const NormalizationParams&, const NormalizationParams&) = default;
};

NormalizationParams fit_normalization(const SeriesFrame& frame, IndexRange train);

/// Min-max scaling to [0, 1] on the fitting range; out-of-range values are
/// clamped to [-0.5, 1.5].
SeriesFrame normalize(const SeriesFrame& frame, const NormalizationParams& params);
SeriesFrame denormalize(const SeriesFrame& frame, const NormalizationParams& params);

struct SplitSpec {
  double train_frac = 0.7;
  double val_frac = 0.2;
  double test_frac = 0.1;

  void validate() const;
};

struct PartitionBounds {
  IndexRange train;
  IndexRange val;
  IndexRange test;
};

/// Chronological split: train gets floor(N * train_frac) rows, validation
/// floor(N * val_frac), test the remainder.
PartitionBounds partition_bounds(std::size_t num_steps, const SplitSpec& split);

/// Sliding windows (stride 1) over one chronological partition.
///
/// The partition's rows are held once (both normalized and raw watts);
/// window i covers rows [start[i], start[i] + n) as input and the following
/// m rows as target.
class WindowedDataset {
 public:
  WindowedDataset() = default;
  WindowedDataset(SeriesFrame raw_partition, const NormalizationParams& params,
                  std::size_t history_len, std::size_t horizon_len,
                  std::size_t partition_offset);

  std::size_t history_len() const noexcept { return history_len_; }
  std::size_t horizon_len() const noexcept { return horizon_len_; }
  std::size_t num_channels() const noexcept { return raw_.num_channels(); }
  std::size_t size() const noexcept { return starts_.size(); }
  bool empty() const noexcept { return starts_.empty(); }

  /// Row index of window i's first input step, relative to the partition.
  std::size_t window_start(std::size_t i) const noexcept { return starts_[i]; }
  /// Row index of the partition's first step within the source frame.
  std::size_t partition_offset() const noexcept { return partition_offset_; }
  int day_of_week(std::size_t i) const noexcept { return dow_[i]; }

  /// [n x channels] normalized.
  Matrix input(std::size_t i) const;
  /// [m x channels] normalized.
  Matrix target(std::size_t i) const;
  /// [m x channels] watts.
  Matrix target_watts(std::size_t i) const;
  /// First timestamp of window i's target.
  std::int64_t target_timestamp(std::size_t i) const noexcept {
    return raw_.timestamps[starts_[i] + history_len_];
  }
  /// True if any input or target cell of window i was imputed.
  bool touches_missing(std::size_t i) const noexcept;

  const SeriesFrame& raw() const noexcept { return raw_; }
  const SeriesFrame& normalized() const noexcept { return normalized_; }
  const NormalizationParams& normalization() const noexcept { return params_; }

  void save(const std::filesystem::path& path) const;
  static WindowedDataset load(const std::filesystem::path& path);

  static constexpr std::string_view kSchemaVersion = "seqdispatch-windows/1";

 private:
  void rebuild_index();

  std::size_t history_len_ = 0;
  std::size_t horizon_len_ = 0;
  std::size_t partition_offset_ = 0;
  SeriesFrame raw_;
  SeriesFrame normalized_;
  NormalizationParams params_;
  std::vector<std::size_t> starts_;
  std::vector<int> dow_;
};

struct WindowedSplits {
  WindowedDataset train;
  WindowedDataset val;
  WindowedDataset test;
  NormalizationParams normalization;
};

/// Split chronologically, fit normalization on the training partition and
/// window each partition independently.
WindowedSplits make_windows(const SeriesFrame& frame, std::size_t history_len,
                            std::size_t horizon_len, const SplitSpec& split);

}  // namespace seqdispatch
