#include "seqdispatch/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "seqdispatch/adam.hpp"
#include "seqdispatch/error.hpp"
#include "seqdispatch/rng.hpp"

namespace seqdispatch {

namespace {

template <typename P>
void add_scaled(P& acc, const P& g, double s) {
  auto dst = param_list(acc);
  auto src = param_list(g);
  for (std::size_t k = 0; k < dst.size(); ++k) {
    double* d = dst[k]->data();
    const double* x = src[k]->data();
    for (std::size_t i = 0; i < dst[k]->size(); ++i) d[i] += s * x[i];
  }
}

template <typename P>
bool grads_finite(const P& g) {
  for (const Matrix* m : param_list(g)) {
    if (!m->all_finite()) return false;
  }
  return true;
}

// Shared batch driver: `window_loss(tape, grads, index)` records one window's
// loss, runs backward into `grads` and returns its loss terms.
template <typename P, typename WindowLossFn>
BatchLoss batch_gradient(const P& p, std::span<const std::size_t> windows, ExecPolicy policy, int jobs, P& grads,
                         WindowLossFn&& window_loss) {
  if (windows.empty()) throw Error(ErrorCode::EmptyDataset, "batch has no windows");
  const std::size_t B = windows.size();
  std::vector<P> per_window(B, zeros_like(p));
  std::vector<BatchLoss> losses(B);
  for_each_index(policy, B, jobs, [&](std::size_t b) {
    thread_local Tape tape;
    tape.clear();
    try {
      losses[b] = window_loss(tape, per_window[b], windows[b]);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NonFiniteLoss) {
        throw Error(ErrorCode::DivergedLoss, "window " + std::to_string(windows[b]) + ": " + e.what());
      }
      throw;
    }
  });
  grads = zeros_like(p);
  BatchLoss mean;
  const double inv = 1.0 / static_cast<double>(B);
  for (std::size_t b = 0; b < B; ++b) {
    add_scaled(grads, per_window[b], inv);
    mean.total += losses[b].total * inv;
    mean.recon += losses[b].recon * inv;
    mean.type += losses[b].type * inv;
    mean.forecast += losses[b].forecast * inv;
  }
  if (!grads_finite(grads)) throw Error(ErrorCode::DivergedLoss, "non-finite gradient");
  return mean;
}

template <typename P, typename GradFn, typename PredictFn>
TrainResult<P> train_impl(P params, const WindowedDataset& train, const WindowedDataset& val,
                          const TrainConfig& config, GradFn&& grad_fn, PredictFn&& predict) {
  config.validate();
  TrainResult<P> result{params, {}};
  if (config.epochs == 0) return result;
  if (train.empty()) throw Error(ErrorCode::EmptyDataset, "training dataset has no windows");
  if (val.empty()) throw Error(ErrorCode::EmptyDataset, "validation dataset has no windows");

  Rng rng(config.seed);
  AdamState adam(AdamConfig{config.lr, 0.9, 0.999, 1e-8});
  P grads = zeros_like(params);
  const auto val_windows = evaluation_windows(val, 1, config.max_val_windows, true);
  if (val_windows.empty()) throw Error(ErrorCode::EmptyDataset, "every validation window touches imputed data");
  const Forecaster forecaster = [&](const Matrix& w, int dow) { return predict(params, w, dow); };

  std::vector<std::size_t> order(train.size());
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    adam.set_lr(config.lr * std::pow(config.lr_decay, static_cast<double>(epoch - 1)));
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    std::size_t used = order.size();
    if (config.max_windows_per_epoch > 0) used = std::min(used, config.max_windows_per_epoch);

    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < used; begin += config.batch_size) {
      const std::size_t end = std::min(used, begin + config.batch_size);
      const BatchLoss loss = grad_fn(params, std::span<const std::size_t>(order.data() + begin, end - begin), grads);
      auto gl = param_list(grads);
      clip_global_norm(gl, config.clip_norm);
      std::vector<const Matrix*> cg(gl.begin(), gl.end());
      adam.step(param_list(params), cg);
      rec.train_loss += loss.total;
      rec.recon_loss += loss.recon;
      rec.type_loss += loss.type;
      rec.forecast_loss += loss.forecast;
      ++batches;
    }
    const double nb = static_cast<double>(batches);
    rec.train_loss /= nb;
    rec.recon_loss /= nb;
    rec.type_loss /= nb;
    rec.forecast_loss /= nb;

    rec.val_wmape = evaluate_forecaster("validation", val, val_windows, forecaster, config.policy, config.jobs)
                        .mean_wmape();
    if (!std::isfinite(rec.val_wmape)) throw Error(ErrorCode::DivergedLoss, "non-finite validation wMAPE");
    if (rec.val_wmape < best) {
      best = rec.val_wmape;
      rec.improved = true;
      result.params = params;
      result.trace.best_epoch = epoch;
      result.trace.best_val_wmape = best;
      since_best = 0;
    } else {
      ++since_best;
    }
    result.trace.epochs.push_back(rec);
    if (config.patience > 0 && since_best >= config.patience && epoch < config.epochs) {
      result.trace.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error(ErrorCode::ValidationError, "batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(ErrorCode::ValidationError, "lr must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw Error(ErrorCode::ValidationError, "lr_decay must be in (0, 1]");
  if (!(clip_norm > 0.0)) throw Error(ErrorCode::ValidationError, "clip_norm must be positive");
  if (weights.recon < 0.0 || weights.type < 0.0 || !(weights.forecast > 0.0)) {
    throw Error(ErrorCode::ValidationError, "loss weights must be >= 0 with forecast weight > 0");
  }
}

void TrainTrace::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  out.precision(17);
  out << "epoch,train_loss,recon_loss,type_loss,forecast_loss,val_wmape,improved\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.recon_loss << ',' << e.type_loss << ',' << e.forecast_loss
        << ',' << e.val_wmape << ',' << (e.improved ? 1 : 0) << '\n';
  }
}

BatchLoss seq2seq_batch_gradient(const Seq2SeqParams& p, const WindowedDataset& data,
                                 std::span<const std::size_t> windows, const LossWeights& weights,
                                 ExecPolicy policy, int jobs, Seq2SeqParams& grads) {
  return batch_gradient(p, windows, policy, jobs, grads, [&](Tape& tape, Seq2SeqParams& g, std::size_t i) {
    const WindowLoss wl =
        seq2seq_window_loss(tape, p, &g, data.input(i), data.day_of_week(i), data.target(i), weights);
    BatchLoss out{tape.scalar(wl.total), wl.recon, wl.type, wl.forecast};
    tape.backward(wl.total);
    return out;
  });
}

BatchLoss lstm_baseline_batch_gradient(const LstmBaselineParams& p, const WindowedDataset& data,
                                       std::span<const std::size_t> windows, ExecPolicy policy, int jobs,
                                       LstmBaselineParams& grads) {
  return batch_gradient(p, windows, policy, jobs, grads, [&](Tape& tape, LstmBaselineParams& g, std::size_t i) {
    const Var loss = lstm_baseline_window_loss(tape, p, &g, data.input(i), data.day_of_week(i), data.target(i));
    const double v = tape.scalar(loss);
    tape.backward(loss);
    return BatchLoss{v, 0.0, 0.0, v};
  });
}

TrainResult<Seq2SeqParams> train_seq2seq(Seq2SeqParams init, const WindowedDataset& train,
                                         const WindowedDataset& val, const TrainConfig& config) {
  return train_impl(
      std::move(init), train, val, config,
      [&](const Seq2SeqParams& p, std::span<const std::size_t> w, Seq2SeqParams& g) {
        return seq2seq_batch_gradient(p, train, w, config.weights, config.policy, config.jobs, g);
      },
      [](const Seq2SeqParams& p, const Matrix& w, int dow) { return forecast_watts(p, w, dow); });
}

TrainResult<LstmBaselineParams> train_lstm_baseline(LstmBaselineParams init, const WindowedDataset& train,
                                                    const WindowedDataset& val, const TrainConfig& config) {
  return train_impl(
      std::move(init), train, val, config,
      [&](const LstmBaselineParams& p, std::span<const std::size_t> w, LstmBaselineParams& g) {
        return lstm_baseline_batch_gradient(p, train, w, config.policy, config.jobs, g);
      },
      [](const LstmBaselineParams& p, const Matrix& w, int dow) { return lstm_baseline_forecast_watts(p, w, dow); });
}

std::vector<std::size_t> evaluation_windows(const WindowedDataset& data, std::size_t stride, std::size_t limit,
                                            bool skip_missing) {
  if (stride == 0) stride = 1;
  std::vector<std::size_t> all;
  for (std::size_t i = 0; i < data.size(); i += stride) {
    if (skip_missing && data.touches_missing(i)) continue;
    all.push_back(i);
  }
  if (limit == 0 || all.size() <= limit) return all;
  std::vector<std::size_t> picked;
  picked.reserve(limit);
  for (std::size_t j = 0; j < limit; ++j) picked.push_back(all[j * all.size() / limit]);
  return picked;
}

MetricReport evaluate_forecaster(const std::string& model, const WindowedDataset& data,
                                 std::span<const std::size_t> windows, const Forecaster& forecaster,
                                 ExecPolicy policy, int jobs) {
  if (windows.empty()) throw Error(ErrorCode::EmptyDataset, "no windows to evaluate");
  const std::size_t k = data.num_channels();
  const std::size_t m = data.horizon_len();
  std::vector<Matrix> predictions(windows.size());
  for_each_index(policy, windows.size(), jobs, [&](std::size_t j) {
    const std::size_t i = windows[j];
    predictions[j] = forecaster(data.input(i), data.day_of_week(i));
    if (predictions[j].rows() != m || predictions[j].cols() != k) {
      throw Error(ErrorCode::ShapeMismatch, model + " returned a forecast of the wrong shape");
    }
  });
  std::vector<std::vector<double>> actual(k), predicted(k);
  for (std::size_t j = 0; j < windows.size(); ++j) {
    const Matrix target = data.target_watts(windows[j]);
    for (std::size_t t = 0; t < m; ++t) {
      for (std::size_t c = 0; c < k; ++c) {
        actual[c].push_back(target(t, c));
        predicted[c].push_back(predictions[j](t, c));
      }
    }
  }
  const auto& norm = data.normalization();
  std::vector<std::string> names;
  std::vector<std::pair<double, double>> ranges;
  for (std::size_t c = 0; c < k; ++c) {
    names.push_back(data.raw().channels[c].name);
    ranges.emplace_back(norm.min[c], norm.max[c]);
  }
  return evaluate_channels(model, names, actual, predicted, ranges);
}

}  // namespace seqdispatch
