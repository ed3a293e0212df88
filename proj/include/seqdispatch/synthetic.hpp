#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "seqdispatch/timeseries.hpp"

namespace seqdispatch {

/// Seeded stand-in for a metered household: appliance duty cycles, a
/// seasonal diurnal PV curve with day-to-day cloud cover, and a total
/// channel that adds unmetered background consumption to the metered loads.
struct SyntheticConfig {
  std::size_t days = 594;
  std::int64_t period = 300;              // seconds
  std::int64_t start = 1609718400;        // 2021-01-04T00:00:00Z, a Monday
  std::uint64_t seed = 7;
  double pv_peak_w = 4500.0;
};

/// hifi_router, dishwasher, pv, tumble_dryer, washing_machine, total.
std::vector<ChannelInfo> synthetic_schema();

SeriesFrame generate_synthetic(const SyntheticConfig& config);

}  // namespace seqdispatch
