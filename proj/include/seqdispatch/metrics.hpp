#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace seqdispatch {

/// Root mean square error. Throws LengthMismatch / Empty.
double rmse(std::span<const double> actual, std::span<const double> predicted);

/// RMSE divided by the channel's value range (max - min). Throws DegenerateRange.
double nrmse(std::span<const double> actual, std::span<const double> predicted,
             std::pair<double, double> channel_range);

/// sum |y - yhat| / sum |y|. Throws ZeroDenominator when every actual is zero.
double wmape(std::span<const double> actual, std::span<const double> predicted);

struct ChannelMetrics {
  std::string channel;
  double rmse = 0.0;
  double nrmse = 0.0;
  double wmape = 0.0;
  std::size_t n = 0;
  bool wmape_defined = true;  // false when the channel's actuals are all zero

  friend bool operator==(const ChannelMetrics&, const ChannelMetrics&) = default;
};

struct MetricReport {
  std::string model;
  std::vector<ChannelMetrics> channels;

  /// Mean wMAPE over channels where it is defined.
  double mean_wmape() const;

  void write_csv(const std::filesystem::path& path) const;
  void write_json(const std::filesystem::path& path) const;
  static MetricReport read_csv(const std::filesystem::path& path);
};

/// Per-channel metrics over paired watt-scale series. `ranges` supplies the
/// (min, max) used by nRMSE for each channel.
MetricReport evaluate_channels(std::string model, std::span<const std::string> channel_names,
                               std::span<const std::vector<double>> actual,
                               std::span<const std::vector<double>> predicted,
                               std::span<const std::pair<double, double>> ranges);

}  // namespace seqdispatch
