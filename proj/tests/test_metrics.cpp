#include <doctest.h>

#include <cmath>
#include <vector>

#include "seqdispatch/error.hpp"
#include "seqdispatch/metrics.hpp"
#include "seqdispatch/rng.hpp"

using namespace seqdispatch;

namespace {

// straight-line references, deliberately naive
double ref_rmse(const std::vector<double>& y, const std::vector<double>& p) {
  double s = 0;
  for (size_t i = 0; i < y.size(); i++) s = s + (y[i] - p[i]) * (y[i] - p[i]);
  return std::sqrt(s / y.size());
}

double ref_wmape(const std::vector<double>& y, const std::vector<double>& p) {
  double num = 0, den = 0;
  for (size_t i = 0; i < y.size(); i++) {
    num = num + std::fabs(y[i] - p[i]);
    den = den + std::fabs(y[i]);
  }
  return num / den;
}

}  // namespace

TEST_CASE("rmse small cases") {
  CHECK(rmse(std::vector<double>{1, 3}, std::vector<double>{2, 2}) == doctest::Approx(1.0));
  CHECK(rmse(std::vector<double>{5}, std::vector<double>{5}) == 0.0);
  CHECK(rmse(std::vector<double>{0, 0, 0, 0}, std::vector<double>{2, 2, 2, 2}) == doctest::Approx(2.0));
}

TEST_CASE("nrmse divides by range") {
  const std::vector<double> y{1, 3}, p{2, 2};
  CHECK(nrmse(y, p, {0.0, 4.0}) == doctest::Approx(0.25));
  CHECK_THROWS_AS(nrmse(y, p, {2.0, 2.0}), Error);
}

TEST_CASE("wmape") {
  CHECK(wmape(std::vector<double>{2, 2}, std::vector<double>{1, 3}) == doctest::Approx(0.5));
  CHECK(wmape(std::vector<double>{-2, 4}, std::vector<double>{-2, 4}) == 0.0);
  try {
    wmape(std::vector<double>{0, 0}, std::vector<double>{1, 1});
    FAIL("expected ZeroDenominator");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroDenominator);
  }
}

TEST_CASE("metric input errors") {
  const std::vector<double> a{1, 2}, b{1};
  CHECK_THROWS_AS(rmse(a, b), Error);
  CHECK_THROWS_AS(rmse(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST_CASE("metrics agree with reference implementations") {
  Rng rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 1 + rng.below(1000);
    std::vector<double> y(n), p(n);
    for (auto& v : y) v = rng.uniform(-50, 500);
    for (auto& v : p) v = rng.uniform(-50, 500);
    CHECK(std::abs(rmse(y, p) - ref_rmse(y, p)) <= 1e-12 * std::max(1.0, ref_rmse(y, p)));
    CHECK(std::abs(nrmse(y, p, {-50, 500}) - ref_rmse(y, p) / 550.0) <= 1e-12);
    CHECK(std::abs(wmape(y, p) - ref_wmape(y, p)) <= 1e-12);
  }
}

TEST_CASE("metrics are invariant to joint scaling only where expected") {
  const std::vector<double> y{1, 4, 2, 8}, p{2, 3, 2, 5};
  std::vector<double> y10, p10;
  for (double v : y) y10.push_back(10 * v);
  for (double v : p) p10.push_back(10 * v);
  CHECK(wmape(y10, p10) == doctest::Approx(wmape(y, p)));
  CHECK(rmse(y10, p10) == doctest::Approx(10 * rmse(y, p)));
  CHECK(nrmse(y10, p10, {0, 80}) == doctest::Approx(nrmse(y, p, {0, 8})));
}

TEST_CASE("evaluate_channels marks all-zero channels") {
  const std::vector<std::string> names{"a", "b"};
  const std::vector<std::vector<double>> act{{1, 2}, {0, 0}}, pred{{1, 3}, {1, 0}};
  const std::vector<std::pair<double, double>> ranges{{0, 4}, {0, 2}};
  const MetricReport r = evaluate_channels("m", names, act, pred, ranges);
  REQUIRE(r.channels.size() == 2);
  CHECK(r.channels[0].wmape_defined);
  CHECK(r.channels[0].wmape == doctest::Approx(1.0 / 3.0));
  CHECK_FALSE(r.channels[1].wmape_defined);
  CHECK(r.mean_wmape() == doctest::Approx(1.0 / 3.0));
}
