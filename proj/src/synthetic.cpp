#include "seqdispatch/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "seqdispatch/error.hpp"
#include "seqdispatch/rng.hpp"

namespace seqdispatch {

namespace {

constexpr std::size_t kRouter = 0, kDishwasher = 1, kPv = 2, kDryer = 3, kWasher = 4, kTotal = 5;

struct Phase {
  double minutes;
  double watts;
};

// Program profiles, minutes at a nominal draw.
constexpr Phase kDishwasherProgram[] = {{10, 150}, {25, 2000}, {30, 120}, {20, 1950}, {15, 60}};
constexpr Phase kWasherProgram[] = {{5, 100}, {20, 2000}, {35, 250}, {15, 500}, {10, 350}};
constexpr Phase kDryerProgram[] = {{70, 2400}, {15, 300}};

// Adds `program` to channel `c` starting at absolute step `start`.
template <std::size_t N>
void run_program(Matrix& v, std::size_t c, std::size_t start, const Phase (&program)[N], double scale,
                 std::int64_t period, Rng& rng) {
  const double step_min = static_cast<double>(period) / 60.0;
  double t = 0.0;
  for (const Phase& ph : program) {
    const double begin = t, end = t + ph.minutes;
    t = end;
    for (std::size_t s = static_cast<std::size_t>(begin / step_min); static_cast<double>(s) * step_min < end; ++s) {
      const double lo = std::max(begin, static_cast<double>(s) * step_min);
      const double hi = std::min(end, static_cast<double>(s + 1) * step_min);
      if (hi <= lo) continue;
      const std::size_t row = start + s;
      if (row >= v.rows()) return;
      v(row, c) += ph.watts * scale * (hi - lo) / step_min * (1.0 + 0.03 * rng.normal());
    }
  }
}

double program_minutes(const Phase* begin, const Phase* end) {
  double total = 0.0;
  for (const Phase* p = begin; p != end; ++p) total += p->minutes;
  return total;
}

}  // namespace

std::vector<ChannelInfo> synthetic_schema() {
  return {{"hifi_router", ChannelKind::load},     {"dishwasher", ChannelKind::load},
          {"pv", ChannelKind::pv},                {"tumble_dryer", ChannelKind::load},
          {"washing_machine", ChannelKind::load}, {"total", ChannelKind::total}};
}

SeriesFrame generate_synthetic(const SyntheticConfig& config) {
  if (config.days == 0 || config.period <= 0 || 86400 % config.period != 0) {
    throw Error(ErrorCode::ValidationError, "synthetic data needs days >= 1 and a period dividing one day");
  }
  const std::size_t per_day = static_cast<std::size_t>(86400 / config.period);
  const std::size_t steps = per_day * config.days;
  const double step_h = static_cast<double>(config.period) / 3600.0;
  Rng rng(config.seed);

  SeriesFrame f;
  f.channels = synthetic_schema();
  f.period = config.period;
  f.timestamps.resize(steps);
  for (std::size_t i = 0; i < steps; ++i) f.timestamps[i] = config.start + static_cast<std::int64_t>(i) * config.period;
  f.values = Matrix(steps, f.channels.size());
  Matrix& v = f.values;

  const double dryer_min = program_minutes(std::begin(kDryerProgram), std::end(kDryerProgram));
  const double washer_min = program_minutes(std::begin(kWasherProgram), std::end(kWasherProgram));
  const auto step_of = [&](double hour) { return static_cast<std::size_t>(std::max(0.0, hour) / step_h); };

  double cloud = 0.3;
  for (std::size_t d = 0; d < config.days; ++d) {
    const std::size_t day0 = d * per_day;
    const int dow = day_of_week(f.timestamps[day0]);
    const bool weekend = dow >= 5;

    // PV: clear-sky bell scaled by season and a persistent cloud index.
    const double doy = std::fmod(static_cast<double>(d) + 3.0, 365.25);
    const double season = -std::cos(2.0 * M_PI * (doy + 10.0) / 365.25);  // -1 midwinter, +1 midsummer
    const double daylen = 12.0 + 4.0 * season;
    const double sunrise = 12.5 - daylen / 2.0, sunset = 12.5 + daylen / 2.0;
    const double amplitude = config.pv_peak_w * (0.65 + 0.35 * season);
    cloud = std::clamp(0.7 * cloud + 0.3 * rng.uniform() + 0.05 * rng.normal(), 0.0, 0.95);
    double ripple = 0.0;
    for (std::size_t s = 0; s < per_day; ++s) {
      const double h = (static_cast<double>(s) + 0.5) * step_h;
      double pv = 0.0;
      if (h > sunrise && h < sunset) {
        const double x = (h - sunrise) / (sunset - sunrise);
        ripple = std::clamp(0.85 * ripple + 0.08 * rng.normal(), -0.4, 0.4);
        pv = amplitude * std::pow(std::sin(M_PI * x), 1.5) * std::clamp(1.0 - cloud + ripple * cloud, 0.02, 1.0);
      }
      v(day0 + s, kPv) = pv;
    }

    // Router draws a steady trickle; the hifi adds evening listening.
    const double listen_start = (weekend ? 17.0 : 19.5) + 0.5 * rng.normal();
    const double listen_len = std::max(0.5, (weekend ? 3.0 : 2.0) + 0.5 * rng.normal());
    for (std::size_t s = 0; s < per_day; ++s) {
      const double h = (static_cast<double>(s) + 0.5) * step_h;
      double w = 28.0 + 2.0 * rng.normal();
      if (h >= listen_start && h < listen_start + listen_len) w += 110.0 + 15.0 * rng.normal();
      v(day0 + s, kRouter) = std::max(w, 0.0);
    }

    // Dishwasher after dinner most days, plus a lunch run on weekends.
    if (rng.uniform() < 0.85) {
      run_program(v, kDishwasher, day0 + step_of(20.0 + 0.6 * rng.normal()), kDishwasherProgram, 1.0, config.period,
                  rng);
    }
    if (weekend && rng.uniform() < 0.6) {
      run_program(v, kDishwasher, day0 + step_of(13.5 + 0.5 * rng.normal()), kDishwasherProgram, 1.0, config.period,
                  rng);
    }

    // Laundry: morning runs, heavier at weekends; the dryer follows a wash.
    const double wash_p = weekend ? 0.9 : (dow == 2 ? 0.7 : 0.3);
    if (rng.uniform() < wash_p) {
      const double start_h = (weekend ? 9.5 : 7.0) + 0.6 * rng.normal();
      run_program(v, kWasher, day0 + step_of(start_h), kWasherProgram, 1.0, config.period, rng);
      if (rng.uniform() < 0.75) {
        const double dry_h = start_h + washer_min / 60.0 + 0.25 + 0.3 * std::abs(rng.normal());
        run_program(v, kDryer, day0 + step_of(dry_h), kDryerProgram, 1.0, config.period, rng);
      }
      if (weekend && rng.uniform() < 0.5) {
        const double second_h = start_h + 2.0 + 0.3 * std::abs(rng.normal());
        run_program(v, kWasher, day0 + step_of(second_h), kWasherProgram, 1.0, config.period, rng);
        if (rng.uniform() < 0.6) {
          run_program(v, kDryer, day0 + step_of(second_h + washer_min / 60.0 + 0.3 + dryer_min / 120.0),
                      kDryerProgram, 1.0, config.period, rng);
        }
      }
    }

    // Total adds unmetered background use with morning and evening peaks.
    for (std::size_t s = 0; s < per_day; ++s) {
      const double h = (static_cast<double>(s) + 0.5) * step_h;
      const double morning = std::exp(-0.5 * std::pow((h - 7.5) / 1.0, 2.0));
      const double evening = std::exp(-0.5 * std::pow((h - 19.0) / 1.8, 2.0));
      double other = 180.0 + 350.0 * morning + 600.0 * evening + (weekend ? 120.0 : 0.0) * std::sin(M_PI * h / 24.0);
      other *= 1.0 + 0.1 * rng.normal();
      if (rng.uniform() < 0.01) other += 1500.0 * rng.uniform();  // kettle, oven
      const std::size_t row = day0 + s;
      double total = std::max(other, 0.0);
      for (std::size_t c : {kRouter, kDishwasher, kDryer, kWasher}) {
        v(row, c) = std::max(v(row, c), 0.0);
        total += v(row, c);
      }
      v(row, kTotal) = total;
    }
  }
  f.missing.assign(steps * f.channels.size(), 0);
  return f;
}

}  // namespace seqdispatch
