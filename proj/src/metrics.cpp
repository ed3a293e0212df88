#include "seqdispatch/metrics.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "seqdispatch/error.hpp"

namespace seqdispatch {

namespace {

void check_pair(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.size() != predicted.size()) {
    throw Error(ErrorCode::LengthMismatch, "actual has " + std::to_string(actual.size()) +
                                               " values, predicted " + std::to_string(predicted.size()));
  }
  if (actual.empty()) throw Error(ErrorCode::Empty, "metric over empty sequences");
}

}  // namespace

double rmse(std::span<const double> actual, std::span<const double> predicted) {
  check_pair(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double r = actual[i] - predicted[i];
    sum += r * r;
  }
  return std::sqrt(sum / static_cast<double>(actual.size()));
}

double nrmse(std::span<const double> actual, std::span<const double> predicted,
             std::pair<double, double> channel_range) {
  const double width = channel_range.second - channel_range.first;
  if (!(width > 0.0)) throw Error(ErrorCode::DegenerateRange, "nRMSE needs max > min");
  return rmse(actual, predicted) / width;
}

double wmape(std::span<const double> actual, std::span<const double> predicted) {
  check_pair(actual, predicted);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    num += std::abs(actual[i] - predicted[i]);
    den += std::abs(actual[i]);
  }
  if (den == 0.0) throw Error(ErrorCode::ZeroDenominator, "wMAPE undefined for all-zero actuals");
  return num / den;
}

double MetricReport::mean_wmape() const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& c : channels) {
    if (!c.wmape_defined) continue;
    sum += c.wmape;
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

MetricReport evaluate_channels(std::string model, std::span<const std::string> channel_names,
                               std::span<const std::vector<double>> actual,
                               std::span<const std::vector<double>> predicted,
                               std::span<const std::pair<double, double>> ranges) {
  if (actual.size() != channel_names.size() || predicted.size() != channel_names.size() ||
      ranges.size() != channel_names.size()) {
    throw Error(ErrorCode::LengthMismatch, "per-channel inputs disagree on channel count");
  }
  MetricReport report;
  report.model = std::move(model);
  for (std::size_t c = 0; c < channel_names.size(); ++c) {
    ChannelMetrics m;
    m.channel = channel_names[c];
    m.rmse = rmse(actual[c], predicted[c]);
    m.n = actual[c].size();
    const double width = ranges[c].second - ranges[c].first;
    m.nrmse = width > 0.0 ? m.rmse / width : 0.0;
    try {
      m.wmape = wmape(actual[c], predicted[c]);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroDenominator) throw;
      m.wmape = 0.0;
      m.wmape_defined = false;
    }
    report.channels.push_back(std::move(m));
  }
  return report;
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.precision(17);
  out << "channel,rmse,nrmse,wmape,n\n";
  for (const auto& c : channels) {
    out << c.channel << ',' << c.rmse << ',' << c.nrmse << ',';
    if (c.wmape_defined) out << c.wmape;
    out << ',' << c.n << '\n';
  }
}

void MetricReport::write_json(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["model"] = model;
  j["channels"] = nlohmann::json::array();
  for (const auto& c : channels) {
    nlohmann::json row{{"channel", c.channel}, {"rmse", c.rmse}, {"nrmse", c.nrmse}, {"n", c.n}};
    row["wmape"] = c.wmape_defined ? nlohmann::json(c.wmape) : nlohmann::json(nullptr);
    j["channels"].push_back(std::move(row));
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

MetricReport MetricReport::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  MetricReport report;
  report.model = path.stem().string();
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    ChannelMetrics m;
    std::getline(ss, m.channel, ',');
    std::getline(ss, field, ',');
    m.rmse = std::stod(field);
    std::getline(ss, field, ',');
    m.nrmse = std::stod(field);
    std::getline(ss, field, ',');
    m.wmape_defined = !field.empty();
    m.wmape = field.empty() ? 0.0 : std::stod(field);
    std::getline(ss, field, ',');
    m.n = std::stoul(field);
    report.channels.push_back(std::move(m));
  }
  return report;
}

}  // namespace seqdispatch
