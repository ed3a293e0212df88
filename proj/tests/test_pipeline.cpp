#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include "seqdispatch/error.hpp"
#include "seqdispatch/pipeline.hpp"

using namespace seqdispatch;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "seqdispatch_pipeline" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::IoError;
}

struct Run {
  int status;
  std::string output;
};

Run run_cli(const std::string& args, const fs::path& dir) {
  const auto log = dir / "cli.log";
  const std::string cmd = std::string(SEQDISPATCH_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

DispatchSettings settings() {
  DispatchSettings s;
  s.hems.devices = {{"dishwasher", 2.0, true, 3, {}, {}}, {"washing_machine", 2.0, true, 2, {}, {}}};
  s.qlearn.episodes = 400;
  s.repetitions = 2;
  return s;
}

DayTrajectories day(double pv_scale, double base_scale) {
  DayTrajectories d;
  for (int h = 0; h < 24; ++h) {
    const double sun = (h >= 7 && h <= 18) ? std::sin((h - 6) * 3.14159 / 13.0) : 0.0;
    d.pv_kw.push_back(pv_scale * 4.0 * sun);
    d.base_load_kw.push_back(base_scale * (0.4 + (h >= 17 && h <= 21 ? 1.2 : 0.0)));
  }
  d.device_kw["dishwasher"] = std::vector<double>(24, 0.0);
  d.device_kw["washing_machine"] = std::vector<double>(24, 0.0);
  d.device_kw["dishwasher"][19] = d.device_kw["dishwasher"][20] = 2.0;
  d.device_kw["washing_machine"][9] = 2.0;
  return d;
}

}  // namespace

TEST_CASE("config parsing and validation") {
  const auto dir = scratch_dir("cfg");
  const auto c = ExperimentConfig::from_json_text(R"({"schema_version": 1, "seed": 9})", dir);
  CHECK(c.seed == 9);
  CHECK(c.seq2seq_train.seed == 10);
  CHECK(c.lstm_train.seed == 11);
  CHECK(c.synthetic.seed == 9);
  CHECK(c.output_dir == dir / "out");
  CHECK(c.dispatch.hems.devices.size() == 3);
  const auto bad = [&](const std::string& text) {
    return code_of([&] { ExperimentConfig::from_json_text(text, dir); });
  };
  CHECK(bad(R"({"schema_version": 2})") == ErrorCode::ValidationError);
  CHECK(bad(R"({"schema_version": 1, "sed": 1})") == ErrorCode::ValidationError);
  CHECK(bad(R"({"schema_version": 1, "preprocessing": {"split": {"train": 0.8, "val": 0.2, "test": 0.1}}})") ==
        ErrorCode::ValidationError);
  CHECK(bad(R"({"schema_version": 1, "dispatch": {"day_list": []}})") == ErrorCode::ValidationError);
  CHECK(bad(R"({"schema_version": 1, "dispatch": {"forecasters": ["oracle"]}})") == ErrorCode::ValidationError);
  CHECK(bad("{not json") == ErrorCode::ValidationError);
}

TEST_CASE("atomic writes and hashing") {
  const auto dir = scratch_dir("atomic");
  write_file_atomic(dir / "a.txt", "hello");
  std::ifstream in(dir / "a.txt");
  std::string s;
  in >> s;
  CHECK(s == "hello");
  CHECK_FALSE(fs::exists(dir / "a.txt.tmp"));
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("hourly trajectories") {
  DispatchSettings s = settings();
  const std::vector<ChannelInfo> ch{{"dishwasher", ChannelKind::load},
                                    {"pv", ChannelKind::pv},
                                    {"washing_machine", ChannelKind::load},
                                    {"total", ChannelKind::total}};
  Matrix w(4, 4);
  for (std::size_t r = 0; r < 4; ++r) {
    w(r, 0) = r < 2 ? 1000.0 : 0.0;
    w(r, 1) = 500.0 * static_cast<double>(r);
    w(r, 3) = 1500.0;
  }
  const DayTrajectories d = hourly_trajectories(w, ch, 2, s);
  REQUIRE(d.pv_kw.size() == 2);
  CHECK(d.pv_kw[0] == doctest::Approx(0.25));
  CHECK(d.pv_kw[1] == doctest::Approx(1.25));
  CHECK(d.device_kw.at("dishwasher")[0] == doctest::Approx(1.0));
  CHECK(d.base_load_kw[0] == doctest::Approx(0.5));
  CHECK(d.base_load_kw[1] == doctest::Approx(1.5));
  CHECK_THROWS_AS(hourly_trajectories(Matrix(3, 4), ch, 2, s), Error);
}

TEST_CASE("identity forecasts give predicted == actual") {
  const DispatchSettings s = settings();
  const DayTrajectories a = day(1.0, 1.0);
  const DayDispatch r = dispatch_day(s, a, a, 42);
  CHECK(r.predicted_profit == r.actual_profit);
  const DayDispatch b = dispatch_day(s, day(0.5, 1.0), a, 42);
  CHECK(b.predicted_profit != b.actual_profit);
}

TEST_CASE("low-PV day keeps forecasters in a narrow profit band") {
  const DispatchSettings s = settings();
  const DayTrajectories actual = day(0.02, 1.0);
  double lo = 1e300, hi = -1e300;
  for (double pv : {0.0, 0.01, 0.02, 0.04}) {
    for (double base : {0.9, 1.0, 1.1}) {
      const double p = dispatch_day(s, day(pv, base), actual, 7).actual_profit;
      lo = std::min(lo, p);
      hi = std::max(hi, p);
    }
  }
  // band relative to what a sunny day's forecast error does
  const DayTrajectories sunny = day(1.0, 1.0);
  const double s1 = dispatch_day(s, day(0.5, 1.0), sunny, 7).actual_profit;
  const double s2 = dispatch_day(s, sunny, sunny, 7).actual_profit;
  INFO("low-PV band " << hi - lo << ", sunny gap " << std::abs(s2 - s1));
  CHECK(hi - lo <= 0.1 * std::abs(lo));
}

TEST_CASE("operation report round trip and summary") {
  const auto dir = scratch_dir("op");
  OperationReport r;
  r.rows = {{0, "2021-01-01", "a", 1.0, 0.5, 2.0}, {1, "2021-01-02", "a", -1.0, -0.25, 0.0},
            {0, "2021-01-01", "b", 0.1, 0.1, 2.0}};
  r.write_csv(dir / "op.csv");
  const OperationReport back = OperationReport::read_csv(dir / "op.csv");
  REQUIRE(back.rows.size() == 3);
  CHECK(back.rows[1].actual_profit == -0.25);
  const auto s = back.summarize();
  CHECK(s.at("a").days == 2);
  CHECK(s.at("a").mean_abs_gap == doctest::Approx(0.625));
  CHECK(s.at("a").max_abs_gap == doctest::Approx(0.75));
  CHECK(s.at("b").mean_abs_gap == 0.0);
}

TEST_CASE("commands report missing inputs") {
  const auto dir = scratch_dir("missing");
  const auto c = ExperimentConfig::from_json_text(R"({"schema_version": 1})", dir);
  CHECK(code_of([&] { cmd_ingest(c); }) == ErrorCode::IoError);
  CHECK(code_of([&] { cmd_train_forecasters(c); }) == ErrorCode::MissingStageOutput);
  CHECK(code_of([&] { cmd_dispatch(c); }) == ErrorCode::MissingStageOutput);
  try {
    cmd_report(c);
    FAIL("expected MissingStageOutput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingStageOutput);
    CHECK(std::string(e.what()).find("train-forecasters") != std::string::npos);
  }
}

TEST_CASE("cli exit codes") {
  const auto dir = scratch_dir("cli");
  std::ofstream(dir / "bad.json") << R"({"schema_version": 1,
    "preprocessing": {"split": {"train": 0.8, "val": 0.2, "test": 0.1}}})";
  CHECK(run_cli("ingest --config " + (dir / "bad.json").string(), dir).status == 1);
  std::ofstream(dir / "ok.json") << R"({"schema_version": 1, "paths": {"data": "nowhere.csv"}})";
  const Run r = run_cli("ingest --config " + (dir / "ok.json").string(), dir);
  CHECK(r.status == 2);
  CHECK(r.output.find("nowhere.csv") != std::string::npos);
  CHECK(run_cli("frobnicate", dir).status == 1);
  CHECK(run_cli("report --config " + (dir / "ok.json").string() + " --out " + (dir / "o").string(), dir).status ==
        2);
}

TEST_CASE("ingest caches on the config hash") {
  const auto dir = scratch_dir("ingest");
  std::ofstream(dir / "c.json") << R"({"schema_version": 1, "seed": 4, "synthetic": {"days": 20},
    "preprocessing": {"history_len": 24, "horizon_len": 6}})";
  const auto c = ExperimentConfig::load(dir / "c.json");
  cmd_synth_data(c);
  const auto first = cmd_ingest(c);
  CHECK_FALSE(first.cache_hit);
  const auto bytes = [&](const char* f) {
    std::ifstream in(c.out(f), std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string before = bytes("windows_test.bin");
  const auto second = cmd_ingest(c);
  CHECK(second.cache_hit);
  CHECK(bytes("windows_test.bin") == before);
}
