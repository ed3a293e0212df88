#include "seqdispatch/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <set>
#include <sstream>

#include "seqdispatch/checkpoint.hpp"
#include "seqdispatch/dp_oracle.hpp"
#include "seqdispatch/error.hpp"
#include "seqdispatch/parallel.hpp"
#include "seqdispatch/varma.hpp"

namespace seqdispatch {

using json = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kModels{"seq2seq", "lstm", "varma", "persistence"};
const std::set<std::string> kForecasters{"seq2seq", "lstm", "varma", "persistence", "biased_pv50", "identity"};

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorCode::ValidationError, msg); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) invalid(where + " must be a JSON object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) invalid("unknown key '" + k + "' in " + where);
  }
}

void parse_train(const json& j, TrainConfig& t, const std::string& where) {
  check_keys(j, {"epochs", "batch_size", "lr", "lr_decay", "patience", "clip_norm", "max_windows_per_epoch", "max_val_windows",
                 "loss_weights", "policy"},
             where);
  t.epochs = j.value("epochs", t.epochs);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.lr = j.value("lr", t.lr);
  t.lr_decay = j.value("lr_decay", t.lr_decay);
  t.patience = j.value("patience", t.patience);
  t.clip_norm = j.value("clip_norm", t.clip_norm);
  t.max_windows_per_epoch = j.value("max_windows_per_epoch", t.max_windows_per_epoch);
  t.max_val_windows = j.value("max_val_windows", t.max_val_windows);
  if (j.contains("loss_weights")) {
    const auto& w = j["loss_weights"];
    check_keys(w, {"recon", "type", "forecast"}, where + ".loss_weights");
    t.weights.recon = w.value("recon", t.weights.recon);
    t.weights.type = w.value("type", t.weights.type);
    t.weights.forecast = w.value("forecast", t.weights.forecast);
  }
  if (j.contains("policy")) t.policy = exec_policy_from_string(j["policy"].get<std::string>());
}

json train_to_json(const TrainConfig& t) {
  return json{{"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"lr", t.lr},
              {"lr_decay", t.lr_decay},
              {"seed", t.seed},
              {"patience", t.patience},
              {"clip_norm", t.clip_norm},
              {"max_windows_per_epoch", t.max_windows_per_epoch},
              {"max_val_windows", t.max_val_windows},
              {"loss_weights", {{"recon", t.weights.recon}, {"type", t.weights.type}, {"forecast", t.weights.forecast}}}};
}

json preprocessing_json(const ExperimentConfig& c) {
  json channels = json::array();
  for (const auto& ch : c.channels) channels.push_back({{"name", ch.name}, {"kind", std::string(to_string(ch.kind))}});
  return json{{"resample_period_s", c.resample_period},
              {"history_len", c.history_len},
              {"horizon_len", c.horizon_len},
              {"split", {{"train", c.split.train_frac}, {"val", c.split.val_frac}, {"test", c.split.test_frac}}},
              {"channels", channels}};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs `write(tmp)` and renames the temporary file over `path`.
template <typename F>
void write_atomic_via(const std::filesystem::path& path, F&& write) {
  auto tmp = path;
  tmp += ".tmp";
  write(tmp);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
}

void require(const std::filesystem::path& path, const std::string& stage) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::MissingStageOutput,
                "'" + path.filename().string() + "' not found; run the " + stage + " stage first");
  }
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

json normalization_json(const NormalizationParams& n) {
  return json{{"channels", n.channel_names}, {"min", n.min}, {"max", n.max}};
}

NormalizationParams normalization_from_json(const json& j) {
  NormalizationParams n;
  n.channel_names = j.at("channels").get<std::vector<std::string>>();
  n.min = j.at("min").get<std::vector<double>>();
  n.max = j.at("max").get<std::vector<double>>();
  return n;
}

std::string ingest_hash(const ExperimentConfig& c) {
  return fnv1a_hex(preprocessing_json(c).dump() + read_file(c.data_file()));
}

struct IngestOutputs {
  WindowedDataset train, val, test;
  std::string hash;
};

IngestOutputs load_ingest(const ExperimentConfig& c) {
  for (const char* f : {"ingest_manifest.json", "windows_train.bin", "windows_val.bin", "windows_test.bin"}) {
    require(c.out(f), "ingest");
  }
  IngestOutputs o;
  o.hash = json::parse(read_file(c.out("ingest_manifest.json"))).at("hash").get<std::string>();
  o.train = WindowedDataset::load(c.out("windows_train.bin"));
  o.val = WindowedDataset::load(c.out("windows_val.bin"));
  o.test = WindowedDataset::load(c.out("windows_test.bin"));
  return o;
}

std::vector<std::string> channel_names(const WindowedDataset& d) {
  std::vector<std::string> out;
  for (const auto& ch : d.raw().channels) out.push_back(ch.name);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// configuration

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text, const std::filesystem::path& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    check_keys(j, {"schema_version", "seed", "jobs", "paths", "synthetic", "preprocessing", "models", "evaluation",
                   "dispatch"},
               "config");
    if (j.value("schema_version", 0) != kSchemaVersion) {
      invalid("config schema_version must be " + std::to_string(kSchemaVersion));
    }
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      check_keys(p, {"data", "output_dir"}, "paths");
      if (p.contains("data")) c.data_path = resolve(base, p["data"].get<std::string>());
      if (p.contains("output_dir")) c.output_dir = resolve(base, p["output_dir"].get<std::string>());
    } else {
      c.output_dir = base / c.output_dir;
    }
    c.synthetic.seed = c.seed;
    if (j.contains("synthetic")) {
      const auto& s = j["synthetic"];
      check_keys(s, {"days", "seed", "period_s", "pv_peak_w", "start"}, "synthetic");
      c.synthetic.days = s.value("days", c.synthetic.days);
      c.synthetic.seed = s.value("seed", c.synthetic.seed);
      c.synthetic.period = s.value("period_s", c.synthetic.period);
      c.synthetic.pv_peak_w = s.value("pv_peak_w", c.synthetic.pv_peak_w);
      if (s.contains("start")) c.synthetic.start = parse_timestamp(s["start"].get<std::string>());
    }
    if (j.contains("preprocessing")) {
      const auto& p = j["preprocessing"];
      check_keys(p, {"resample_period_s", "history_len", "horizon_len", "split", "channels"}, "preprocessing");
      c.resample_period = p.value("resample_period_s", c.resample_period);
      c.history_len = p.value("history_len", c.history_len);
      c.horizon_len = p.value("horizon_len", c.horizon_len);
      if (p.contains("split")) {
        const auto& s = p["split"];
        check_keys(s, {"train", "val", "test"}, "preprocessing.split");
        c.split.train_frac = s.value("train", c.split.train_frac);
        c.split.val_frac = s.value("val", c.split.val_frac);
        c.split.test_frac = s.value("test", c.split.test_frac);
      }
      if (p.contains("channels")) {
        c.channels.clear();
        for (const auto& ch : p["channels"]) {
          c.channels.push_back({ch.at("name").get<std::string>(),
                                channel_kind_from_string(ch.value("kind", std::string("load")))});
        }
      }
    }
    if (j.contains("models")) {
      const auto& m = j["models"];
      check_keys(m, {"seq2seq", "lstm", "varma"}, "models");
      if (m.contains("seq2seq")) {
        const auto& s = m["seq2seq"];
        check_keys(s, {"encoder_hidden", "decoder_hidden", "embed_dim", "train"}, "models.seq2seq");
        c.seq2seq_arch.encoder_hidden = s.value("encoder_hidden", c.seq2seq_arch.encoder_hidden);
        c.seq2seq_arch.decoder_hidden = s.value("decoder_hidden", c.seq2seq_arch.decoder_hidden);
        c.seq2seq_arch.embed_dim = s.value("embed_dim", c.seq2seq_arch.embed_dim);
        if (s.contains("train")) parse_train(s["train"], c.seq2seq_train, "models.seq2seq.train");
      }
      if (m.contains("lstm")) {
        const auto& s = m["lstm"];
        check_keys(s, {"hidden", "embed_dim", "train"}, "models.lstm");
        c.lstm_arch.hidden = s.value("hidden", c.lstm_arch.hidden);
        c.lstm_arch.embed_dim = s.value("embed_dim", c.lstm_arch.embed_dim);
        if (s.contains("train")) parse_train(s["train"], c.lstm_train, "models.lstm.train");
      }
      if (m.contains("varma")) {
        const auto& s = m["varma"];
        check_keys(s, {"p", "q"}, "models.varma");
        c.varma_p = s.value("p", c.varma_p);
        c.varma_q = s.value("q", c.varma_q);
      }
    }
    if (j.contains("evaluation")) {
      const auto& e = j["evaluation"];
      check_keys(e, {"stride", "max_test_windows"}, "evaluation");
      c.eval_stride = e.value("stride", c.eval_stride);
      c.max_test_windows = e.value("max_test_windows", c.max_test_windows);
    }
    if (j.contains("dispatch")) {
      const auto& d = j["dispatch"];
      DispatchSettings& s = c.dispatch;
      check_keys(d, {"days", "day_list", "repetitions", "qlearn", "ess", "step_hours", "prices", "devices",
                     "pv_channel", "total_channel", "forecasters", "biased_pv_scale"},
                 "dispatch");
      s.num_days = d.value("days", s.num_days);
      if (d.contains("day_list")) {
        s.days = d["day_list"].get<std::vector<std::size_t>>();
        if (s.days.empty()) invalid("dispatch.day_list is empty");
      }
      s.repetitions = d.value("repetitions", s.repetitions);
      if (d.contains("qlearn")) {
        const auto& q = d["qlearn"];
        check_keys(q, {"episodes", "gamma", "learning_rate", "epsilon_initial", "epsilon_decay", "epsilon_floor",
                       "soc_bins"},
                   "dispatch.qlearn");
        s.qlearn.episodes = q.value("episodes", s.qlearn.episodes);
        s.qlearn.gamma = q.value("gamma", s.qlearn.gamma);
        s.qlearn.learning_rate = q.value("learning_rate", s.qlearn.learning_rate);
        s.qlearn.epsilon_initial = q.value("epsilon_initial", s.qlearn.epsilon_initial);
        s.qlearn.epsilon_decay = q.value("epsilon_decay", s.qlearn.epsilon_decay);
        s.qlearn.epsilon_floor = q.value("epsilon_floor", s.qlearn.epsilon_floor);
        s.qlearn.soc_bins = q.value("soc_bins", s.qlearn.soc_bins);
      }
      if (d.contains("ess")) {
        const auto& e = d["ess"];
        check_keys(e, {"capacity_kwh", "charge_kw", "soc_min", "soc_max", "initial_soc"}, "dispatch.ess");
        s.hems.ess_capacity_kwh = e.value("capacity_kwh", s.hems.ess_capacity_kwh);
        s.hems.charge_kw = e.value("charge_kw", s.hems.charge_kw);
        s.hems.soc_min = e.value("soc_min", s.hems.soc_min);
        s.hems.soc_max = e.value("soc_max", s.hems.soc_max);
        s.hems.initial_soc = e.value("initial_soc", s.hems.initial_soc);
      }
      s.hems.step_hours = d.value("step_hours", s.hems.step_hours);
      if (d.contains("prices")) {
        const auto& p = d["prices"];
        check_keys(p, {"peak_buy", "offpeak_buy", "peak_start_hour", "peak_end_hour", "sell_ratio"}, "dispatch.prices");
        s.peak_buy = p.value("peak_buy", s.peak_buy);
        s.offpeak_buy = p.value("offpeak_buy", s.offpeak_buy);
        s.peak_start_hour = p.value("peak_start_hour", s.peak_start_hour);
        s.peak_end_hour = p.value("peak_end_hour", s.peak_end_hour);
        s.sell_ratio = p.value("sell_ratio", s.sell_ratio);
      }
      if (d.contains("devices")) {
        s.hems.devices.clear();
        for (const auto& dv : d["devices"]) {
          DeviceSpec spec;
          spec.name = dv.at("name").get<std::string>();
          spec.rated_kw = dv.at("rated_kw").get<double>();
          spec.deferrable = dv.value("deferrable", true);
          spec.max_wait = dv.value("max_wait", 0);
          s.hems.devices.push_back(spec);
        }
      }
      s.pv_channel = d.value("pv_channel", s.pv_channel);
      s.total_channel = d.value("total_channel", s.total_channel);
      if (d.contains("forecasters")) s.forecasters = d["forecasters"].get<std::vector<std::string>>();
      s.biased_pv_scale = d.value("biased_pv_scale", s.biased_pv_scale);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("config: ") + e.what());
  }
  if (c.dispatch.hems.devices.empty() && !c.dispatch.forecasters.empty()) {
    c.dispatch.hems.devices = {{"dishwasher", 2.0, true, 3, {}, {}},
                               {"washing_machine", 2.0, true, 2, {}, {}},
                               {"tumble_dryer", 2.5, true, 2, {}, {}}};
  }
  c.seq2seq_train.seed = c.seed + 1;
  c.lstm_train.seed = c.seed + 2;
  c.seq2seq_train.jobs = c.lstm_train.jobs = c.jobs;
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) invalid("config file '" + path.string() + "' does not exist");
  return from_json_text(read_file(path), path.parent_path());
}

void ExperimentConfig::validate() const {
  split.validate();
  if (history_len < 1 || horizon_len < 1) invalid("history_len and horizon_len must be >= 1");
  if (horizon_len > history_len) invalid("horizon_len must not exceed history_len");
  if (resample_period <= 0) invalid("resample_period_s must be positive");
  if (channels.empty()) invalid("at least one channel is required");
  std::set<std::string> names;
  for (const auto& ch : channels) {
    if (!names.insert(ch.name).second) invalid("duplicate channel '" + ch.name + "'");
  }
  seq2seq_train.validate();
  lstm_train.validate();
  if (eval_stride == 0) invalid("evaluation.stride must be >= 1");
  const auto& d = dispatch;
  if (d.days.empty() && d.num_days == 0) invalid("dispatch day list is empty");
  if (d.repetitions == 0) invalid("dispatch.repetitions must be >= 1");
  d.qlearn.validate();
  for (const auto& f : d.forecasters) {
    if (!kForecasters.count(f)) invalid("unknown forecaster '" + f + "'");
  }
  if (!d.forecasters.empty()) {
    for (const std::string& ch : {d.pv_channel, d.total_channel}) {
      if (!names.count(ch)) invalid("dispatch channel '" + ch + "' is not a data channel");
    }
    for (const auto& dev : d.hems.devices) {
      if (!names.count(dev.name)) invalid("device '" + dev.name + "' has no data channel");
    }
    const double steps = 3600.0 * d.hems.step_hours / static_cast<double>(resample_period);
    if (std::abs(steps - std::round(steps)) > 1e-9 || steps < 1.0) {
      invalid("dispatch step must span a whole number of data periods");
    }
    if (static_cast<std::size_t>(std::round(steps)) > horizon_len) {
      invalid("forecast horizon is shorter than one dispatch step");
    }
    if (std::abs(std::fmod(24.0, d.hems.step_hours)) > 1e-9) invalid("dispatch step must divide 24 hours");
  }
}

std::filesystem::path ExperimentConfig::data_file() const {
  return data_path.empty() ? output_dir / "synthetic.csv" : data_path;
}

// ---------------------------------------------------------------------------
// helpers

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  write_atomic_via(path, [&](const std::filesystem::path& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out) throw Error(ErrorCode::IoError, "write failed for '" + tmp.string() + "'");
  });
}

std::string fnv1a_hex(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

// ---------------------------------------------------------------------------
// synth-data / ingest

CommandResult cmd_synth_data(const ExperimentConfig& c) {
  std::filesystem::create_directories(c.output_dir);
  const SeriesFrame frame = generate_synthetic(c.synthetic);
  const auto path = c.output_dir / "synthetic.csv";
  write_atomic_via(path, [&](const std::filesystem::path& tmp) { write_csv(frame, tmp); });
  return {"wrote " + std::to_string(frame.num_steps()) + " rows to " + path.string(), false};
}

CommandResult cmd_ingest(const ExperimentConfig& c) {
  const auto data = c.data_file();
  if (!std::filesystem::exists(data)) throw Error(ErrorCode::IoError, "data file '" + data.string() + "' does not exist");
  std::filesystem::create_directories(c.output_dir);
  const std::string hash = ingest_hash(c);
  const auto manifest = c.out("ingest_manifest.json");
  const bool outputs_present = std::filesystem::exists(c.out("windows_train.bin")) &&
                               std::filesystem::exists(c.out("windows_val.bin")) &&
                               std::filesystem::exists(c.out("windows_test.bin"));
  if (std::filesystem::exists(manifest) && outputs_present) {
    try {
      if (json::parse(read_file(manifest)).at("hash").get<std::string>() == hash) {
        return {"cache hit (" + hash + ")", true};
      }
    } catch (const json::exception&) {
      // unreadable manifest: rebuild
    }
  }

  SeriesFrame frame = load_csv(data, c.channels);
  if (frame.period != c.resample_period) frame = resample_mean(frame, c.resample_period);
  const WindowedSplits splits = make_windows(frame, c.history_len, c.horizon_len, c.split);
  const std::pair<const char*, const WindowedDataset*> parts[] = {
      {"windows_train.bin", &splits.train}, {"windows_val.bin", &splits.val}, {"windows_test.bin", &splits.test}};
  for (const auto& [name, ds] : parts) {
    write_atomic_via(c.out(name), [&](const std::filesystem::path& tmp) { ds->save(tmp); });
  }
  write_file_atomic(c.out("normalization.json"), normalization_json(splits.normalization).dump(2) + "\n");
  json m{{"schema", std::string(WindowedDataset::kSchemaVersion)},
         {"hash", hash},
         {"period_s", frame.period},
         {"steps", frame.num_steps()},
         {"windows", {{"train", splits.train.size()}, {"val", splits.val.size()}, {"test", splits.test.size()}}},
         {"preprocessing", preprocessing_json(c)}};
  write_file_atomic(manifest, m.dump(2) + "\n");
  return {"ingested " + std::to_string(frame.num_steps()) + " steps: " + std::to_string(splits.train.size()) + "/" +
              std::to_string(splits.val.size()) + "/" + std::to_string(splits.test.size()) + " windows (" + hash + ")",
          false};
}

// ---------------------------------------------------------------------------
// models on disk

namespace {

struct VarmaArtifact {
  VarmaModel model;
  std::vector<std::size_t> fitted_channels;  // the others are constant in training
};

struct ModelSet {
  Seq2SeqParams seq2seq;
  LstmBaselineParams lstm;
  VarmaArtifact varma;
  NormalizationParams normalization;
};

json arch_json(const Seq2SeqArch& a) {
  return json{{"channels", a.channels},         {"history_len", a.history_len},
              {"horizon_len", a.horizon_len},   {"encoder_hidden", a.encoder_hidden},
              {"decoder_hidden", a.decoder_hidden}, {"embed_dim", a.embed_dim}};
}

json arch_json(const LstmBaselineArch& a) {
  return json{{"channels", a.channels},
              {"history_len", a.history_len},
              {"horizon_len", a.horizon_len},
              {"hidden", a.hidden},
              {"embed_dim", a.embed_dim}};
}

void save_model(const ExperimentConfig& c, const std::string& name, const std::vector<NamedTensor>& tensors,
                const json& arch, const NormalizationParams& norm, const json& train_cfg, const std::string& hash,
                const TrainTrace& trace) {
  write_atomic_via(c.out(name + ".ckpt"), [&](const std::filesystem::path& tmp) { save_checkpoint(tmp, tensors); });
  json side{{"model", name},
            {"schema_version", 1},
            {"architecture", arch},
            {"normalization", normalization_json(norm)},
            {"train", train_cfg},
            {"config_hash", fnv1a_hex(train_cfg.dump() + arch.dump() + hash)},
            {"best_epoch", trace.best_epoch},
            {"best_val_wmape", trace.best_val_wmape},
            {"epochs_run", trace.epochs.size()}};
  write_file_atomic(c.out(name + ".json"), side.dump(2) + "\n");
  write_atomic_via(c.out("train_trace_" + name + ".csv"),
                   [&](const std::filesystem::path& tmp) { trace.write_csv(tmp.string()); });
}

VarmaArtifact fit_varma_artifact(const ExperimentConfig& c, const WindowedDataset& train) {
  const auto& norm = train.normalization();
  VarmaArtifact a;
  for (std::size_t ch = 0; ch < norm.num_channels(); ++ch) {
    if (!norm.is_constant(ch)) a.fitted_channels.push_back(ch);
  }
  const Matrix& all = train.normalized().values;
  Matrix y(all.rows(), a.fitted_channels.size());
  for (std::size_t t = 0; t < all.rows(); ++t) {
    for (std::size_t j = 0; j < a.fitted_channels.size(); ++j) y(t, j) = all(t, a.fitted_channels[j]);
  }
  a.model = varma_fit(y, c.varma_p, c.varma_q);
  return a;
}

Matrix varma_forecast_watts(const VarmaArtifact& a, const NormalizationParams& norm, const Matrix& window,
                            std::size_t horizon) {
  Matrix hist(window.rows(), a.fitted_channels.size());
  for (std::size_t t = 0; t < window.rows(); ++t) {
    for (std::size_t j = 0; j < a.fitted_channels.size(); ++j) hist(t, j) = window(t, a.fitted_channels[j]);
  }
  const Matrix f = varma_forecast(a.model, hist, horizon);
  Matrix full(horizon, window.cols());
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t j = 0; j < a.fitted_channels.size(); ++j) full(t, a.fitted_channels[j]) = f(t, j);
  }
  return denormalize_forecast(norm, full);
}

ModelSet load_models(const ExperimentConfig& c) {
  for (const char* f : {"seq2seq.ckpt", "seq2seq.json", "lstm.ckpt", "lstm.json", "varma.json"}) {
    require(c.out(f), "train-forecasters");
  }
  ModelSet m;
  try {
    const json s = json::parse(read_file(c.out("seq2seq.json")));
    const auto& a = s.at("architecture");
    Seq2SeqArch arch;
    arch.channels = a.at("channels");
    arch.history_len = a.at("history_len");
    arch.horizon_len = a.at("horizon_len");
    arch.encoder_hidden = a.at("encoder_hidden");
    arch.decoder_hidden = a.at("decoder_hidden");
    arch.embed_dim = a.at("embed_dim");
    m.seq2seq = Seq2SeqParams::zeros(arch);
    from_tensors(m.seq2seq, load_checkpoint(c.out("seq2seq.ckpt")));
    m.seq2seq.normalization = normalization_from_json(s.at("normalization"));
    m.normalization = m.seq2seq.normalization;

    const json l = json::parse(read_file(c.out("lstm.json")));
    const auto& la = l.at("architecture");
    LstmBaselineArch larch;
    larch.channels = la.at("channels");
    larch.history_len = la.at("history_len");
    larch.horizon_len = la.at("horizon_len");
    larch.hidden = la.at("hidden");
    larch.embed_dim = la.at("embed_dim");
    m.lstm = LstmBaselineParams::zeros(larch);
    from_tensors(m.lstm, load_checkpoint(c.out("lstm.ckpt")));
    m.lstm.normalization = normalization_from_json(l.at("normalization"));

    const json v = json::parse(read_file(c.out("varma.json")));
    m.varma.model = VarmaModel::from_json(v.at("model").dump());
    m.varma.fitted_channels = v.at("fitted_channels").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("model sidecar: ") + e.what());
  }
  return m;
}

Forecaster model_forecaster(const ModelSet& m, const std::string& name, std::size_t horizon) {
  if (name == "seq2seq") return [&m](const Matrix& w, int dow) { return forecast_watts(m.seq2seq, w, dow); };
  if (name == "lstm") return [&m](const Matrix& w, int dow) { return lstm_baseline_forecast_watts(m.lstm, w, dow); };
  if (name == "varma") {
    return [&m, horizon](const Matrix& w, int) { return varma_forecast_watts(m.varma, m.normalization, w, horizon); };
  }
  if (name == "persistence") {
    return [&m, horizon](const Matrix& w, int) {
      return denormalize_forecast(m.normalization, persistence_predict(w, horizon));
    };
  }
  throw Error(ErrorCode::ValidationError, "'" + name + "' is not a trained model");
}

void write_forecasts_csv(const std::filesystem::path& path, const WindowedDataset& data,
                         std::span<const std::size_t> windows, const Forecaster& f) {
  write_atomic_via(path, [&](const std::filesystem::path& tmp) {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
    out.precision(17);
    out << "timestamp,channel,actual,predicted\n";
    const auto names = channel_names(data);
    for (std::size_t i : windows) {
      const Matrix pred = f(data.input(i), data.day_of_week(i));
      const Matrix act = data.target_watts(i);
      for (std::size_t t = 0; t < act.rows(); ++t) {
        const auto ts = format_timestamp(data.target_timestamp(i) + static_cast<std::int64_t>(t) * data.raw().period);
        for (std::size_t ch = 0; ch < act.cols(); ++ch) {
          out << ts << ',' << names[ch] << ',' << act(t, ch) << ',' << pred(t, ch) << '\n';
        }
      }
    }
  });
}

// Channel x model table of one metric with the best (lowest) model marked.
std::string metric_table(const std::vector<MetricReport>& reports, const std::string& metric) {
  std::ostringstream out;
  out.precision(17);
  out << "channel";
  for (const auto& r : reports) out << ',' << r.model;
  out << ",best\n";
  for (std::size_t ch = 0; ch < reports.front().channels.size(); ++ch) {
    out << reports.front().channels[ch].channel;
    double best = std::numeric_limits<double>::infinity();
    std::string best_model;
    for (const auto& r : reports) {
      const ChannelMetrics& m = r.channels[ch];
      const bool defined = metric != "wmape" || m.wmape_defined;
      const double v = metric == "rmse" ? m.rmse : metric == "nrmse" ? m.nrmse : m.wmape;
      out << ',';
      if (defined) out << v;
      if (defined && v < best) {
        best = v;
        best_model = r.model;
      }
    }
    out << ',' << best_model << '\n';
  }
  return out.str();
}

}  // namespace

CommandResult cmd_train_forecasters(const ExperimentConfig& c) {
  const IngestOutputs in = load_ingest(c);
  const std::size_t k = in.train.num_channels();
  const auto& norm = in.train.normalization();

  Seq2SeqArch sa = c.seq2seq_arch;
  sa.channels = k;
  sa.history_len = in.train.history_len();
  sa.horizon_len = in.train.horizon_len();
  Rng s_rng(c.seed + 11);
  Seq2SeqParams s_init = Seq2SeqParams::init(sa, s_rng);
  s_init.normalization = norm;
  TrainResult<Seq2SeqParams> s2s;
  try {
    s2s = train_seq2seq(std::move(s_init), in.train, in.val, c.seq2seq_train);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("seq2seq: ") + e.what());
  }
  save_model(c, "seq2seq", to_tensors(s2s.params), arch_json(sa), norm, train_to_json(c.seq2seq_train), in.hash,
             s2s.trace);

  LstmBaselineArch la = c.lstm_arch;
  la.channels = k;
  la.history_len = in.train.history_len();
  la.horizon_len = in.train.horizon_len();
  Rng l_rng(c.seed + 12);
  LstmBaselineParams l_init = LstmBaselineParams::init(la, l_rng);
  l_init.normalization = norm;
  TrainResult<LstmBaselineParams> lstm;
  try {
    lstm = train_lstm_baseline(std::move(l_init), in.train, in.val, c.lstm_train);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("lstm: ") + e.what());
  }
  save_model(c, "lstm", to_tensors(lstm.params), arch_json(la), norm, train_to_json(c.lstm_train), in.hash,
             lstm.trace);

  VarmaArtifact va;
  try {
    va = fit_varma_artifact(c, in.train);
  } catch (const Error& e) {
    throw Error(e.code(), std::string("varma: ") + e.what());
  }
  json vj{{"model", json::parse(va.model.to_json())}, {"fitted_channels", va.fitted_channels}};
  write_file_atomic(c.out("varma.json"), vj.dump(2) + "\n");

  const ModelSet models = load_models(c);
  const auto windows = evaluation_windows(in.test, c.eval_stride, c.max_test_windows, true);
  std::vector<MetricReport> reports;
  for (const auto& name : kModels) {
    const Forecaster f = model_forecaster(models, name, in.test.horizon_len());
    MetricReport r = evaluate_forecaster(name, in.test, windows, f, ExecPolicy::parallel, c.jobs);
    write_atomic_via(c.out("metrics_" + name + ".csv"), [&](const std::filesystem::path& tmp) { r.write_csv(tmp); });
    write_atomic_via(c.out("metrics_" + name + ".json"), [&](const std::filesystem::path& tmp) { r.write_json(tmp); });
    write_forecasts_csv(c.out("forecasts_" + name + ".csv"), in.test, windows, f);
    reports.push_back(std::move(r));
  }
  for (const char* metric : {"wmape", "rmse", "nrmse"}) {
    write_file_atomic(c.out(std::string("forecast_table_") + metric + ".csv"), metric_table(reports, metric));
  }
  std::ostringstream msg;
  msg << "trained on " << in.train.size() << " windows; test wMAPE";
  for (const auto& r : reports) msg << ' ' << r.model << '=' << fmt(r.mean_wmape());
  return {msg.str(), false};
}

// ---------------------------------------------------------------------------
// dispatch

DayTrajectories hourly_trajectories(const Matrix& watts, std::span<const ChannelInfo> channels,
                                    std::size_t steps_per_hour, const DispatchSettings& settings) {
  if (steps_per_hour == 0 || watts.rows() % steps_per_hour != 0) {
    throw Error(ErrorCode::ShapeMismatch, "trajectory rows are not a whole number of dispatch steps");
  }
  if (watts.cols() != channels.size()) throw Error(ErrorCode::ShapeMismatch, "channel count mismatch");
  const auto find = [&](const std::string& name) {
    for (std::size_t c = 0; c < channels.size(); ++c) {
      if (channels[c].name == name) return c;
    }
    throw Error(ErrorCode::ChannelMismatch, "no channel named '" + name + "'");
  };
  const std::size_t T = watts.rows() / steps_per_hour;
  const auto hourly_kw = [&](std::size_t c) {
    std::vector<double> out(T, 0.0);
    for (std::size_t h = 0; h < T; ++h) {
      double s = 0.0;
      for (std::size_t r = 0; r < steps_per_hour; ++r) s += watts(h * steps_per_hour + r, c);
      out[h] = s / static_cast<double>(steps_per_hour) / 1000.0;
    }
    return out;
  };
  DayTrajectories d;
  d.pv_kw = hourly_kw(find(settings.pv_channel));
  d.base_load_kw = hourly_kw(find(settings.total_channel));
  for (const auto& dev : settings.hems.devices) {
    auto kw = hourly_kw(find(dev.name));
    for (std::size_t h = 0; h < T; ++h) d.base_load_kw[h] -= kw[h];
    d.device_kw.emplace(dev.name, std::move(kw));
  }
  for (double& b : d.base_load_kw) b = std::max(b, 0.0);
  return d;
}

HemsConfig day_environment(const DispatchSettings& settings, const DayTrajectories& traj) {
  HemsConfig env = settings.hems;
  env.horizon = static_cast<int>(traj.pv_kw.size());
  set_peak_offpeak_prices(env, settings.peak_buy, settings.offpeak_buy, settings.peak_start_hour,
                          settings.peak_end_hour, settings.sell_ratio);
  env.devices = derive_device_requests(traj.device_kw, settings.hems.devices);
  return env;
}

DayDispatch dispatch_day(const DispatchSettings& settings, const DayTrajectories& forecast,
                         const DayTrajectories& actual, std::uint64_t seed) {
  const HemsConfig train_env = day_environment(settings, forecast);
  const HemsConfig test_env = day_environment(settings, actual);
  DayDispatch out;
  for (std::size_t r = 0; r < settings.repetitions; ++r) {
    QLearnConfig q = settings.qlearn;
    q.seed = seed + r;
    const OfflineResult trained = train_offline(q, train_env, forecast.pv_kw, forecast.base_load_kw);
    out.predicted_profit += trained.predicted_profit;
    out.actual_profit += test_online(trained.table, test_env, actual.pv_kw, actual.base_load_kw).total_profit;
  }
  out.predicted_profit /= static_cast<double>(settings.repetitions);
  out.actual_profit /= static_cast<double>(settings.repetitions);
  return out;
}

void OperationReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  out.precision(17);
  out << "day,date,forecaster,predicted_profit,actual_profit,optimal_profit\n";
  for (const auto& r : rows) {
    out << r.day << ',' << r.date << ',' << r.forecaster << ',' << r.predicted_profit << ',' << r.actual_profit << ','
        << r.optimal_profit << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

OperationReport OperationReport::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
  OperationReport rep;
  std::string line;
  std::getline(in, line);
  if (line != "day,date,forecaster,predicted_profit,actual_profit,optimal_profit") {
    throw Error(ErrorCode::ParseError, path.string() + ": unexpected header");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 6) throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": 6 fields expected");
    try {
      rep.rows.push_back({std::stoul(f[0]), f[1], f[2], std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": bad number");
    }
  }
  return rep;
}

std::map<std::string, OperationReport::ForecasterSummary> OperationReport::summarize() const {
  std::map<std::string, ForecasterSummary> out;
  for (const auto& r : rows) {
    auto& s = out[r.forecaster];
    ++s.days;
    s.mean_predicted += r.predicted_profit;
    s.mean_actual += r.actual_profit;
    s.mean_optimal += r.optimal_profit;
    const double gap = std::abs(r.predicted_profit - r.actual_profit);
    s.mean_abs_gap += gap;
    s.max_abs_gap = std::max(s.max_abs_gap, gap);
  }
  for (auto& [_, s] : out) {
    const auto n = static_cast<double>(s.days);
    s.mean_predicted /= n;
    s.mean_actual /= n;
    s.mean_optimal /= n;
    s.mean_abs_gap /= n;
  }
  return out;
}

namespace {

Matrix rows_of(const Matrix& m, std::size_t begin, std::size_t end) {
  Matrix out(end - begin, m.cols());
  for (std::size_t r = begin; r < end; ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(r - begin, c) = m(r, c);
  }
  return out;
}

json summary_json(const std::map<std::string, OperationReport::ForecasterSummary>& s) {
  json out = json::object();
  for (const auto& [name, v] : s) {
    out[name] = {{"days", v.days},
                 {"mean_predicted_profit", v.mean_predicted},
                 {"mean_actual_profit", v.mean_actual},
                 {"mean_optimal_profit", v.mean_optimal},
                 {"mean_abs_gap", v.mean_abs_gap},
                 {"max_abs_gap", v.max_abs_gap}};
  }
  return out;
}

}  // namespace

CommandResult cmd_dispatch(const ExperimentConfig& c) {
  const DispatchSettings& ds = c.dispatch;
  if (ds.forecasters.empty()) invalid("dispatch.forecasters is empty");
  const IngestOutputs in = load_ingest(c);
  const ModelSet models = load_models(c);
  const WindowedDataset& test = in.test;
  const SeriesFrame& raw = test.raw();
  const Matrix& norm_rows = test.normalized().values;
  const std::size_t n = test.history_len();

  const auto sph = static_cast<std::size_t>(std::llround(3600.0 * ds.hems.step_hours / static_cast<double>(raw.period)));
  const auto T = static_cast<std::size_t>(std::llround(24.0 / ds.hems.step_hours));
  const std::size_t day_rows = T * sph;
  if (sph == 0 || sph > test.horizon_len()) invalid("dispatch step does not fit the forecast horizon");

  std::vector<std::size_t> candidates;
  for (std::size_t r = n; r + day_rows <= raw.num_steps(); ++r) {
    if (raw.timestamps[r] % 86400 == 0) candidates.push_back(r);
  }
  std::vector<std::size_t> day_starts;
  if (!ds.days.empty()) {
    for (std::size_t d : ds.days) {
      if (d >= candidates.size()) {
        invalid("dispatch day " + std::to_string(d) + " out of range (" + std::to_string(candidates.size()) +
                " full test days)");
      }
      day_starts.push_back(candidates[d]);
    }
  } else {
    if (candidates.size() < ds.num_days) {
      invalid("only " + std::to_string(candidates.size()) + " full test days available, " +
              std::to_string(ds.num_days) + " requested");
    }
    day_starts.assign(candidates.end() - static_cast<std::ptrdiff_t>(ds.num_days), candidates.end());
  }

  const std::size_t F = ds.forecasters.size();
  const std::size_t P = raw.channels.size();
  const std::size_t pv_col = raw.channel_index(ds.pv_channel);
  std::vector<DayTrajectories> actual(day_starts.size());
  std::vector<double> optimal(day_starts.size());
  DpOptions dp_opts;
  dp_opts.soc_bins = ds.qlearn.soc_bins;
  dp_opts.policy = ExecPolicy::serial;
  for_each_index(ExecPolicy::parallel, day_starts.size(), c.jobs, [&](std::size_t d) {
    try {
      actual[d] = hourly_trajectories(rows_of(raw.values, day_starts[d], day_starts[d] + day_rows), raw.channels, sph,
                                      ds);
      const HemsConfig env = day_environment(ds, actual[d]);
      optimal[d] = dp_solve(env, actual[d].pv_kw, actual[d].base_load_kw, dp_opts).optimal_profit;
    } catch (const Error& e) {
      throw Error(e.code(), "day " + std::to_string(d) + ": " + e.what());
    }
  });

  std::vector<DayDispatch> results(day_starts.size() * F);
  for_each_index(ExecPolicy::parallel, results.size(), c.jobs, [&](std::size_t task) {
    const std::size_t d = task / F;
    const std::string& name = ds.forecasters[task % F];
    const std::size_t start = day_starts[d];
    try {
      Matrix watts = rows_of(raw.values, start, start + day_rows);
      if (name == "biased_pv50") {
        for (std::size_t r = 0; r < watts.rows(); ++r) watts(r, pv_col) *= ds.biased_pv_scale;
      } else if (name != "identity") {
        const Forecaster f = model_forecaster(models, name, test.horizon_len());
        for (std::size_t h = 0; h < T; ++h) {
          const std::size_t end = start + h * sph;
          const Matrix pred = f(rows_of(norm_rows, end - n, end), day_of_week(raw.timestamps[end]));
          for (std::size_t r = 0; r < sph; ++r) {
            for (std::size_t ch = 0; ch < P; ++ch) watts(h * sph + r, ch) = pred(r, ch);
          }
        }
      }
      results[task] = dispatch_day(ds, hourly_trajectories(watts, raw.channels, sph, ds), actual[d], c.seed);
    } catch (const Error& e) {
      throw Error(e.code(), "day " + std::to_string(d) + " (" + name + "): " + e.what());
    }
  });

  OperationReport rep;
  std::size_t dominance_violations = 0;
  for (std::size_t d = 0; d < day_starts.size(); ++d) {
    const std::string date = format_timestamp(raw.timestamps[day_starts[d]]).substr(0, 10);
    for (std::size_t f = 0; f < F; ++f) {
      const DayDispatch& r = results[d * F + f];
      if (r.actual_profit > optimal[d] + 1e-9) ++dominance_violations;
      rep.rows.push_back({d, date, ds.forecasters[f], r.predicted_profit, r.actual_profit, optimal[d]});
    }
  }
  std::filesystem::create_directories(c.output_dir);
  write_atomic_via(c.out("operation.csv"), [&](const std::filesystem::path& tmp) { rep.write_csv(tmp); });
  for (const auto& name : ds.forecasters) {
    std::ostringstream out;
    out.precision(17);
    out << "day,date,predicted_profit,actual_profit,optimal_profit\n";
    for (const auto& r : rep.rows) {
      if (r.forecaster != name) continue;
      out << r.day << ',' << r.date << ',' << r.predicted_profit << ',' << r.actual_profit << ',' << r.optimal_profit
          << '\n';
    }
    write_file_atomic(c.out("profit_curve_" + name + ".csv"), out.str());
  }
  const auto summary = rep.summarize();
  json sj{{"days", day_starts.size()},
          {"repetitions", ds.repetitions},
          {"episodes", ds.qlearn.episodes},
          {"oracle_dominance_violations", dominance_violations},
          {"forecasters", summary_json(summary)}};
  write_file_atomic(c.out("operation_summary.json"), sj.dump(2) + "\n");
  if (dominance_violations > 0) {
    throw Error(ErrorCode::InfeasibleAction,
                std::to_string(dominance_violations) + " rows beat the oracle; see operation.csv");
  }
  std::ostringstream msg;
  msg << day_starts.size() << " days x " << F << " forecasters; mean |gap|";
  for (const auto& [name, s] : summary) msg << ' ' << name << '=' << std::setprecision(4) << s.mean_abs_gap;
  return {msg.str(), false};
}

// ---------------------------------------------------------------------------
// report

CommandResult cmd_report(const ExperimentConfig& c) {
  for (const auto& m : kModels) require(c.out("metrics_" + m + ".csv"), "train-forecasters");
  require(c.out("operation.csv"), "dispatch");
  std::vector<MetricReport> reports;
  for (const auto& m : kModels) {
    reports.push_back(MetricReport::read_csv(c.out("metrics_" + m + ".csv")));
    reports.back().model = m;
  }
  const OperationReport op = OperationReport::read_csv(c.out("operation.csv"));
  const auto summary = op.summarize();

  json forecast = json::object();
  for (const auto& r : reports) {
    json ch = json::object();
    for (const auto& m : r.channels) {
      ch[m.channel] = {{"rmse", m.rmse}, {"nrmse", m.nrmse}, {"wmape", m.wmape_defined ? json(m.wmape) : json()}};
    }
    forecast[r.model] = {{"mean_wmape", r.mean_wmape()}, {"channels", ch}};
  }
  json best = json::object();
  std::map<std::string, std::size_t> wins;
  for (std::size_t i = 0; i < reports.front().channels.size(); ++i) {
    std::string who;
    double v = std::numeric_limits<double>::infinity();
    for (const auto& r : reports) {
      const auto& m = r.channels[i];
      if (m.wmape_defined && m.wmape < v) {
        v = m.wmape;
        who = r.model;
      }
    }
    best[reports.front().channels[i].channel] = who;
    if (!who.empty()) ++wins[who];
  }
  json gaps = json::object();
  for (const auto& [name, s] : summary) gaps[name] = s.mean_abs_gap;
  json j{{"forecast", forecast},
         {"best_wmape_by_channel", best},
         {"operation", summary_json(summary)},
         {"mean_abs_profit_gap", gaps}};
  write_file_atomic(c.out("report.json"), j.dump(2) + "\n");

  std::ostringstream md;
  md << std::fixed << std::setprecision(4);
  md << "# Forecast and dispatch summary\n\n## Held-out wMAPE\n\n| channel |";
  for (const auto& r : reports) md << ' ' << r.model << " |";
  md << " best |\n|---|";
  for (std::size_t i = 0; i <= reports.size(); ++i) md << "---|";
  md << '\n';
  for (std::size_t i = 0; i < reports.front().channels.size(); ++i) {
    const auto& name = reports.front().channels[i].channel;
    md << "| " << name << " |";
    for (const auto& r : reports) {
      if (r.channels[i].wmape_defined) {
        md << ' ' << r.channels[i].wmape << " |";
      } else {
        md << " n/a |";
      }
    }
    md << ' ' << best[name].get<std::string>() << " |\n";
  }
  md << "| mean |";
  for (const auto& r : reports) md << ' ' << r.mean_wmape() << " |";
  md << " |\n\n## Daily profit\n\n| forecaster | days | predicted | actual | optimal | mean abs gap | max abs gap |\n"
     << "|---|---|---|---|---|---|---|\n";
  for (const auto& [name, s] : summary) {
    md << "| " << name << " | " << s.days << " | " << s.mean_predicted << " | " << s.mean_actual << " | "
       << s.mean_optimal << " | " << s.mean_abs_gap << " | " << s.max_abs_gap << " |\n";
  }
  write_file_atomic(c.out("report.md"), md.str());

  std::ostringstream msg;
  msg << "report over " << op.rows.size() << " dispatch rows; best-channel wins";
  for (const auto& [m, w] : wins) msg << ' ' << m << '=' << w;
  return {msg.str(), false};
}

}  // namespace seqdispatch
