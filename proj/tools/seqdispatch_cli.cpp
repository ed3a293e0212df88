#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "seqdispatch/error.hpp"
#include "seqdispatch/pipeline.hpp"

namespace sd = seqdispatch;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out;
};

// Flags override the file, so patch the JSON before it is validated.
sd::ExperimentConfig load_config(const Globals& g) {
  nlohmann::ordered_json j{{"schema_version", sd::ExperimentConfig::kSchemaVersion}};
  std::filesystem::path base = std::filesystem::current_path();
  if (!g.config.empty()) {
    const std::filesystem::path path(g.config);
    std::ifstream in(path);
    if (!in) throw sd::Error(sd::ErrorCode::ValidationError, "cannot read config '" + g.config + "'");
    try {
      j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw sd::Error(sd::ErrorCode::ValidationError, std::string("config is not valid JSON: ") + e.what());
    }
    base = std::filesystem::absolute(path).parent_path();
  }
  if (g.seed) j["seed"] = *g.seed;
  if (g.jobs) j["jobs"] = *g.jobs;
  if (!g.out.empty()) j["paths"]["output_dir"] = std::filesystem::absolute(g.out).string();
  return sd::ExperimentConfig::from_json_text(j.dump(), base);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seqdispatch: appliance/PV forecasting and battery dispatch experiments"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "experiment config (JSON)");
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--jobs", g.jobs, "worker threads (0 = all cores)");

  using Cmd = sd::CommandResult (*)(const sd::ExperimentConfig&);
  const std::pair<const char*, std::pair<const char*, Cmd>> commands[] = {
      {"synth-data", {"generate the synthetic household corpus", sd::cmd_synth_data}},
      {"ingest", {"resample, split, normalize and window the data", sd::cmd_ingest}},
      {"train-forecasters", {"train Seq2Seq, LSTM and VARMA and score them", sd::cmd_train_forecasters}},
      {"dispatch", {"Q-learning dispatch per test day and forecaster", sd::cmd_dispatch}},
      {"report", {"summarize metrics and dispatch outputs", sd::cmd_report}},
  };
  Cmd chosen = nullptr;
  std::string chosen_name;
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    // --config etc. may also follow the subcommand
    sub->fallthrough();
    sub->callback([&chosen, &chosen_name, fn = entry.second, n = std::string(name)] {
      chosen = fn;
      chosen_name = n;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const auto cfg = load_config(g);
    const auto t0 = std::chrono::steady_clock::now();
    const auto res = chosen(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << chosen_name << ": " << res.message << " [" << std::fixed << std::setprecision(1) << secs << "s]\n";
    return 0;
  } catch (const sd::Error& e) {
    std::cerr << "error (" << sd::to_string(e.code()) << "): " << e.what() << '\n';
    return e.code() == sd::ErrorCode::ValidationError ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
