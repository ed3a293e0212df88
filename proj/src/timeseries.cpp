#include "seqdispatch/timeseries.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "seqdispatch/detail/binary_io.hpp"
#include "seqdispatch/error.hpp"

namespace seqdispatch {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(pos)));
      break;
    }
    out.push_back(trim(line.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  return out;
}

bool parse_int(std::string_view s, std::int64_t& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_double(std::string_view s, double& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

// Howard Hinnant's days_from_civil.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::string_view to_string(ChannelKind kind) noexcept {
  switch (kind) {
    case ChannelKind::load: return "load";
    case ChannelKind::pv: return "pv";
    case ChannelKind::total: return "total";
  }
  return "load";
}

ChannelKind channel_kind_from_string(std::string_view s) {
  if (s == "load") return ChannelKind::load;
  if (s == "pv") return ChannelKind::pv;
  if (s == "total") return ChannelKind::total;
  throw Error(ErrorCode::ValidationError, "unknown channel kind '" + std::string(s) + "'");
}

std::int64_t parse_timestamp(std::string_view text) {
  text = trim(text);
  std::int64_t epoch = 0;
  if (parse_int(text, epoch)) return epoch;

  // YYYY-MM-DD[T ]HH:MM[:SS][Z]
  auto bad = [&] {
    return Error(ErrorCode::ParseError, "unparseable timestamp '" + std::string(text) + "'");
  };
  if (text.size() < 16 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
      text[13] != ':') {
    throw bad();
  }
  std::int64_t y, mo, d, h, mi, s = 0;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), d) || !parse_int(text.substr(11, 2), h) ||
      !parse_int(text.substr(14, 2), mi)) {
    throw bad();
  }
  std::string_view rest = text.substr(16);
  if (!rest.empty() && rest.front() == ':') {
    if (rest.size() < 3 || !parse_int(rest.substr(1, 2), s)) throw bad();
    rest.remove_prefix(3);
  }
  if (rest == "Z") rest = {};
  if (!rest.empty() || mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) throw bad();
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 + h * 3600 +
         mi * 60 + s;
}

std::string format_timestamp(std::int64_t t) {
  const std::int64_t days = floor_div(t, 86400);
  const std::int64_t secs = t - days * 86400;
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ", static_cast<long long>(y), m, d,
                static_cast<long long>(secs / 3600), static_cast<long long>((secs / 60) % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

int day_of_week(std::int64_t t) noexcept {
  // 1970-01-01 was a Thursday (index 3 with Monday = 0).
  const std::int64_t days = floor_div(t, 86400);
  return static_cast<int>(((days + 3) % 7 + 7) % 7);
}

std::size_t SeriesFrame::channel_index(std::string_view name) const {
  for (std::size_t c = 0; c < channels.size(); ++c) {
    if (channels[c].name == name) return c;
  }
  throw Error(ErrorCode::ChannelMismatch, "no channel named '" + std::string(name) + "'");
}

void SeriesFrame::validate() const {
  std::unordered_set<std::string> names;
  for (const auto& ch : channels) {
    if (!names.insert(ch.name).second) {
      throw Error(ErrorCode::ValidationError, "duplicate channel name '" + ch.name + "'");
    }
  }
  if (values.rows() != timestamps.size() || values.cols() != channels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "frame values shape does not match timestamps/channels");
  }
  if (!missing.empty() && missing.size() != values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "missing-mask shape does not match values");
  }
  for (std::size_t i = 1; i < timestamps.size(); ++i) {
    if (timestamps[i] <= timestamps[i - 1]) {
      throw Error(ErrorCode::NonMonotonicTimestamps, "timestamps not strictly increasing at row " +
                                                         std::to_string(i));
    }
    if (timestamps[i] - timestamps[i - 1] != period) {
      throw Error(ErrorCode::InconsistentPeriod, "spacing differs from period at row " + std::to_string(i));
    }
  }
  if (!values.all_finite()) throw Error(ErrorCode::ValidationError, "non-finite frame value");
}

SeriesFrame SeriesFrame::slice(std::size_t begin, std::size_t end) const {
  end = std::min(end, num_steps());
  begin = std::min(begin, end);
  SeriesFrame out;
  out.channels = channels;
  out.period = period;
  out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                        timestamps.begin() + static_cast<std::ptrdiff_t>(end));
  const std::size_t c = num_channels();
  out.values = Matrix(end - begin, c,
                      std::vector<double>(values.data() + begin * c, values.data() + end * c));
  if (!missing.empty()) {
    out.missing.assign(missing.begin() + static_cast<std::ptrdiff_t>(begin * c),
                       missing.begin() + static_cast<std::ptrdiff_t>(end * c));
  }
  return out;
}

SeriesFrame load_csv(const std::filesystem::path& path, std::span<const ChannelInfo> schema) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, path.string() + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto header = split_commas(line);
  if (header.empty() || header[0] != "timestamp") {
    throw Error(ErrorCode::MissingColumn, path.string() + ": first column must be 'timestamp'");
  }
  std::vector<std::size_t> column_of(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    auto it = std::find(header.begin() + 1, header.end(), schema[c].name);
    if (it == header.end()) {
      throw Error(ErrorCode::MissingColumn, path.string() + ": column '" + schema[c].name + "' not found");
    }
    column_of[c] = static_cast<std::size_t>(it - header.begin());
  }

  const std::size_t nc = schema.size();
  std::vector<std::int64_t> stamps;
  std::vector<double> cells;
  std::vector<std::uint8_t> missing;
  std::vector<std::size_t> bad_rows;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) continue;
    const auto fields = split_commas(line);
    std::int64_t ts = 0;
    bool ok = fields.size() == header.size();
    if (ok) {
      try {
        ts = parse_timestamp(fields[0]);
      } catch (const Error&) {
        ok = false;
      }
    }
    std::vector<double> row(nc, 0.0);
    std::vector<std::uint8_t> row_missing(nc, 0);
    for (std::size_t c = 0; ok && c < nc; ++c) {
      const auto field = fields[column_of[c]];
      if (field.empty() || field == "NaN" || field == "nan") {
        row_missing[c] = 1;
      } else if (!parse_double(field, row[c])) {
        ok = false;
      }
    }
    if (!ok) {
      bad_rows.push_back(row_number);
      continue;
    }
    stamps.push_back(ts);
    cells.insert(cells.end(), row.begin(), row.end());
    missing.insert(missing.end(), row_missing.begin(), row_missing.end());
  }
  if (!bad_rows.empty()) {
    std::ostringstream msg;
    msg << path.string() << ": unparseable rows";
    for (std::size_t i = 0; i < bad_rows.size() && i < 20; ++i) msg << (i ? ", " : " ") << bad_rows[i];
    if (bad_rows.size() > 20) msg << " ... (" << bad_rows.size() << " total)";
    throw Error(ErrorCode::ParseError, msg.str());
  }
  if (stamps.size() < 2) {
    throw Error(ErrorCode::ParseError, path.string() + ": need at least two data rows to infer the period");
  }

  for (std::size_t i = 1; i < stamps.size(); ++i) {
    if (stamps[i] <= stamps[i - 1]) {
      throw Error(ErrorCode::NonMonotonicTimestamps,
                  path.string() + ": timestamp at data row " + std::to_string(i + 1) + " not after previous");
    }
  }
  const std::int64_t period = stamps[1] - stamps[0];

  // Spacings that are integer multiples of the period are gaps and get
  // filled; anything else off by more than 1% is rejected.
  SeriesFrame frame;
  frame.channels.assign(schema.begin(), schema.end());
  frame.period = period;
  std::vector<double> out_cells;
  std::vector<std::uint8_t> out_missing;
  out_cells.reserve(cells.size());
  std::vector<double> last(nc, 0.0);
  auto push_row = [&](std::int64_t ts, const double* vals, const std::uint8_t* miss) {
    frame.timestamps.push_back(ts);
    for (std::size_t c = 0; c < nc; ++c) {
      const bool m = miss == nullptr || miss[c] != 0;
      double v = m ? last[c] : vals[c];
      v = std::max(v, 0.0);  // power readings are nonnegative
      last[c] = v;
      out_cells.push_back(v);
      out_missing.push_back(m ? 1 : 0);
    }
  };
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    if (i > 0) {
      const std::int64_t gap = stamps[i] - stamps[i - 1];
      const double ratio = static_cast<double>(gap) / static_cast<double>(period);
      const double nearest = std::round(ratio);
      if (nearest < 1.0 || std::abs(gap - nearest * period) > 0.01 * period) {
        throw Error(ErrorCode::InconsistentPeriod,
                    path.string() + ": spacing " + std::to_string(gap) + " s at data row " +
                        std::to_string(i + 1) + " deviates from period " + std::to_string(period) + " s");
      }
      for (std::int64_t k = 1; k < static_cast<std::int64_t>(nearest); ++k) {
        push_row(frame.timestamps.back() + period, nullptr, nullptr);
      }
      // Snap to the lattice so the constant-period invariant is exact.
      stamps[i] = frame.timestamps.back() + period;
    }
    push_row(stamps[i], cells.data() + i * nc, missing.data() + i * nc);
  }
  frame.values = Matrix(frame.timestamps.size(), nc, std::move(out_cells));
  frame.missing = std::move(out_missing);
  frame.validate();
  return frame;
}

void write_csv(const SeriesFrame& frame, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << "timestamp";
  for (const auto& ch : frame.channels) out << ',' << ch.name;
  out << '\n';
  char buf[64];
  for (std::size_t i = 0; i < frame.num_steps(); ++i) {
    out << format_timestamp(frame.timestamps[i]);
    for (std::size_t c = 0; c < frame.num_channels(); ++c) {
      if (frame.is_missing(i, c)) {
        out << ',';
        continue;
      }
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, frame.values(i, c));
      out << ',' << std::string_view(buf, static_cast<std::size_t>(p - buf));
    }
    out << '\n';
  }
}

SeriesFrame resample_mean(const SeriesFrame& frame, std::int64_t target_period) {
  if (frame.period <= 0 || target_period <= 0 || target_period % frame.period != 0) {
    throw Error(ErrorCode::IncompatiblePeriod, "target period " + std::to_string(target_period) +
                                                   " s is not an integer multiple of " +
                                                   std::to_string(frame.period) + " s");
  }
  const auto k = static_cast<std::size_t>(target_period / frame.period);
  const std::size_t buckets = frame.num_steps() / k;
  const std::size_t nc = frame.num_channels();

  SeriesFrame out;
  out.channels = frame.channels;
  out.period = target_period;
  out.timestamps.resize(buckets);
  out.values = Matrix(buckets, nc);
  out.missing.assign(buckets * nc, 0);
  for (std::size_t b = 0; b < buckets; ++b) {
    out.timestamps[b] = frame.timestamps[b * k];
    for (std::size_t c = 0; c < nc; ++c) {
      double sum = 0.0;
      bool any_missing = false;
      for (std::size_t j = 0; j < k; ++j) {
        sum += frame.values(b * k + j, c);
        any_missing = any_missing || frame.is_missing(b * k + j, c);
      }
      out.values(b, c) = sum / static_cast<double>(k);
      out.missing[b * nc + c] = any_missing ? 1 : 0;
    }
  }
  return out;
}

double NormalizationParams::normalize(std::size_t c, double watts) const noexcept {
  if (is_constant(c)) return 0.0;
  return std::clamp((watts - min[c]) / range(c), -0.5, 1.5);
}

double NormalizationParams::denormalize(std::size_t c, double value) const noexcept {
  if (is_constant(c)) return min[c];
  return value * range(c) + min[c];
}

NormalizationParams fit_normalization(const SeriesFrame& frame, IndexRange train) {
  if (train.end > frame.num_steps() || train.begin >= train.end) {
    throw Error(ErrorCode::EmptyPartition, "normalization requires a nonempty training range");
  }
  NormalizationParams p;
  const std::size_t nc = frame.num_channels();
  for (const auto& ch : frame.channels) p.channel_names.push_back(ch.name);
  p.min.assign(nc, 0.0);
  p.max.assign(nc, 0.0);
  for (std::size_t c = 0; c < nc; ++c) {
    double lo = frame.values(train.begin, c);
    double hi = lo;
    for (std::size_t i = train.begin + 1; i < train.end; ++i) {
      lo = std::min(lo, frame.values(i, c));
      hi = std::max(hi, frame.values(i, c));
    }
    p.min[c] = lo;
    p.max[c] = hi;
  }
  return p;
}

namespace {

void check_channels(const SeriesFrame& frame, const NormalizationParams& params) {
  bool match = frame.num_channels() == params.num_channels();
  for (std::size_t c = 0; match && c < frame.num_channels(); ++c) {
    match = frame.channels[c].name == params.channel_names[c];
  }
  if (!match) throw Error(ErrorCode::ChannelMismatch, "frame channels do not match normalization params");
}

}  // namespace

SeriesFrame normalize(const SeriesFrame& frame, const NormalizationParams& params) {
  check_channels(frame, params);
  SeriesFrame out = frame;
  for (std::size_t i = 0; i < out.num_steps(); ++i) {
    for (std::size_t c = 0; c < out.num_channels(); ++c) out.values(i, c) = params.normalize(c, frame.values(i, c));
  }
  return out;
}

SeriesFrame denormalize(const SeriesFrame& frame, const NormalizationParams& params) {
  check_channels(frame, params);
  SeriesFrame out = frame;
  for (std::size_t i = 0; i < out.num_steps(); ++i) {
    for (std::size_t c = 0; c < out.num_channels(); ++c) {
      out.values(i, c) = params.denormalize(c, frame.values(i, c));
    }
  }
  return out;
}

void SplitSpec::validate() const {
  for (double f : {train_frac, val_frac, test_frac}) {
    if (!(f > 0.0 && f < 1.0)) {
      throw Error(ErrorCode::ValidationError, "split fractions must lie in (0, 1)");
    }
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw Error(ErrorCode::ValidationError, "split fractions must sum to 1");
  }
}

PartitionBounds partition_bounds(std::size_t num_steps, const SplitSpec& split) {
  split.validate();
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(num_steps) * split.train_frac));
  const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(num_steps) * split.val_frac));
  PartitionBounds b;
  b.train = {0, n_train};
  b.val = {n_train, n_train + n_val};
  b.test = {n_train + n_val, num_steps};
  return b;
}

WindowedDataset::WindowedDataset(SeriesFrame raw_partition, const NormalizationParams& params,
                                 std::size_t history_len, std::size_t horizon_len,
                                 std::size_t partition_offset)
    : history_len_(history_len),
      horizon_len_(horizon_len),
      partition_offset_(partition_offset),
      raw_(std::move(raw_partition)),
      params_(params) {
  if (history_len_ == 0 || horizon_len_ == 0) {
    throw Error(ErrorCode::ValidationError, "history and horizon lengths must be >= 1");
  }
  normalized_ = normalize(raw_, params_);
  rebuild_index();
}

void WindowedDataset::rebuild_index() {
  starts_.clear();
  dow_.clear();
  const std::size_t span = history_len_ + horizon_len_;
  const std::size_t len = raw_.num_steps();
  if (len < span) return;
  const std::size_t count = len - span + 1;
  starts_.reserve(count);
  dow_.reserve(count);
  for (std::size_t s = 0; s < count; ++s) {
    starts_.push_back(s);
    dow_.push_back(seqdispatch::day_of_week(raw_.timestamps[s + history_len_]));
  }
}

namespace {

Matrix copy_rows(const Matrix& m, std::size_t begin, std::size_t count) {
  const std::size_t c = m.cols();
  return Matrix(count, c, std::vector<double>(m.data() + begin * c, m.data() + (begin + count) * c));
}

}  // namespace

Matrix WindowedDataset::input(std::size_t i) const {
  return copy_rows(normalized_.values, starts_[i], history_len_);
}

Matrix WindowedDataset::target(std::size_t i) const {
  return copy_rows(normalized_.values, starts_[i] + history_len_, horizon_len_);
}

Matrix WindowedDataset::target_watts(std::size_t i) const {
  return copy_rows(raw_.values, starts_[i] + history_len_, horizon_len_);
}

bool WindowedDataset::touches_missing(std::size_t i) const noexcept {
  if (raw_.missing.empty()) return false;
  const std::size_t nc = raw_.num_channels();
  const auto first = raw_.missing.begin() + static_cast<std::ptrdiff_t>(starts_[i] * nc);
  const auto last = first + static_cast<std::ptrdiff_t>((history_len_ + horizon_len_) * nc);
  return std::any_of(first, last, [](std::uint8_t m) { return m != 0; });
}

void WindowedDataset::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << kSchemaVersion << '\n';
  detail::write_u64(out, history_len_);
  detail::write_u64(out, horizon_len_);
  detail::write_u64(out, partition_offset_);
  detail::write_i64(out, raw_.period);
  detail::write_u64(out, raw_.num_channels());
  for (std::size_t c = 0; c < raw_.num_channels(); ++c) {
    detail::write_string(out, raw_.channels[c].name);
    detail::write_u8(out, static_cast<std::uint8_t>(raw_.channels[c].kind));
    detail::write_f64(out, params_.min[c]);
    detail::write_f64(out, params_.max[c]);
  }
  detail::write_u64(out, raw_.num_steps());
  for (auto ts : raw_.timestamps) detail::write_i64(out, ts);
  for (double v : raw_.values.values()) detail::write_f64(out, v);
  const bool has_mask = !raw_.missing.empty();
  detail::write_u8(out, has_mask ? 1 : 0);
  if (has_mask) {
    for (auto m : raw_.missing) detail::write_u8(out, m);
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

WindowedDataset WindowedDataset::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  detail::expect_magic(in, std::string(kSchemaVersion) + "\n", path.string());
  const auto n = detail::read_u64(in);
  const auto m = detail::read_u64(in);
  const auto offset = detail::read_u64(in);
  SeriesFrame raw;
  raw.period = detail::read_i64(in);
  const auto nc = detail::read_u64(in);
  NormalizationParams params;
  for (std::uint64_t c = 0; c < nc; ++c) {
    ChannelInfo info;
    info.name = detail::read_string(in);
    const auto kind = detail::read_u8(in);
    if (kind > 2) throw Error(ErrorCode::IoError, "bad channel kind in '" + path.string() + "'");
    info.kind = static_cast<ChannelKind>(kind);
    params.channel_names.push_back(info.name);
    params.min.push_back(detail::read_f64(in));
    params.max.push_back(detail::read_f64(in));
    raw.channels.push_back(std::move(info));
  }
  const auto steps = detail::read_u64(in);
  raw.timestamps.resize(steps);
  for (auto& ts : raw.timestamps) ts = detail::read_i64(in);
  raw.values = Matrix(steps, nc);
  for (double& v : raw.values.values()) v = detail::read_f64(in);
  if (detail::read_u8(in) != 0) {
    raw.missing.resize(steps * nc);
    for (auto& b : raw.missing) b = detail::read_u8(in);
  }
  return WindowedDataset(std::move(raw), params, n, m, offset);
}

WindowedSplits make_windows(const SeriesFrame& frame, std::size_t history_len, std::size_t horizon_len,
                            const SplitSpec& split) {
  if (history_len == 0 || horizon_len == 0) {
    throw Error(ErrorCode::ValidationError, "history and horizon lengths must be >= 1");
  }
  if (frame.num_steps() < history_len + horizon_len) {
    throw Error(ErrorCode::FrameTooShort, "frame has " + std::to_string(frame.num_steps()) +
                                              " steps, need at least " +
                                              std::to_string(history_len + horizon_len));
  }
  const auto bounds = partition_bounds(frame.num_steps(), split);
  WindowedSplits out;
  out.normalization = fit_normalization(frame, bounds.train);
  auto build = [&](IndexRange r) {
    return WindowedDataset(frame.slice(r.begin, r.end), out.normalization, history_len, horizon_len, r.begin);
  };
  out.train = build(bounds.train);
  out.val = build(bounds.val);
  out.test = build(bounds.test);
  return out;
}

}  // namespace seqdispatch
