#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "seqdispatch/lstm_baseline.hpp"
#include "seqdispatch/metrics.hpp"
#include "seqdispatch/parallel.hpp"
#include "seqdispatch/seq2seq.hpp"
#include "seqdispatch/timeseries.hpp"

namespace seqdispatch {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double lr_decay = 1.0;  // per-epoch factor on lr
  std::uint64_t seed = 1;
  LossWeights weights;  // the baseline only uses `forecast`
  std::size_t patience = 5;
  double clip_norm = 5.0;
  /// 0 = every training window each epoch; otherwise a fresh random subset.
  std::size_t max_windows_per_epoch = 0;
  /// 0 = every validation window; otherwise an evenly strided subset.
  std::size_t max_val_windows = 0;
  ExecPolicy policy = ExecPolicy::parallel;
  int jobs = 0;

  /// Throws ValidationError.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double recon_loss = 0.0;
  double type_loss = 0.0;
  double forecast_loss = 0.0;
  double val_wmape = 0.0;
  bool improved = false;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_val_wmape = 0.0;
  bool stopped_early = false;

  void write_csv(const std::string& path) const;
};

template <typename P>
struct TrainResult {
  P params;
  TrainTrace trace;
};

/// Mean loss terms over one batch.
struct BatchLoss {
  double total = 0.0;
  double recon = 0.0;
  double type = 0.0;
  double forecast = 0.0;
};

/// Mean gradient over `windows` of `data`, written to `grads` (which must be
/// shaped like `p`). Per-window gradients land in separate buffers and are
/// summed in index order, so serial and parallel results are bit-identical.
/// Throws DivergedLoss on a non-finite loss.
BatchLoss seq2seq_batch_gradient(const Seq2SeqParams& p, const WindowedDataset& data,
                                 std::span<const std::size_t> windows, const LossWeights& weights,
                                 ExecPolicy policy, int jobs, Seq2SeqParams& grads);
BatchLoss lstm_baseline_batch_gradient(const LstmBaselineParams& p, const WindowedDataset& data,
                                       std::span<const std::size_t> windows, ExecPolicy policy, int jobs,
                                       LstmBaselineParams& grads);

/// Adam + global-norm clipping with early stopping on validation wMAPE. The
/// returned parameters are those of the best validation epoch.
TrainResult<Seq2SeqParams> train_seq2seq(Seq2SeqParams init, const WindowedDataset& train,
                                         const WindowedDataset& val, const TrainConfig& config);
TrainResult<LstmBaselineParams> train_lstm_baseline(LstmBaselineParams init, const WindowedDataset& train,
                                                    const WindowedDataset& val, const TrainConfig& config);

/// Watt-scale [horizon x channels] forecast from a normalized window.
using Forecaster = std::function<Matrix(const Matrix& window, int day_of_week)>;

/// Window indices 0, stride, 2*stride, ... optionally skipping windows that
/// touch imputed cells, truncated to `limit` evenly spaced picks (0 = all).
std::vector<std::size_t> evaluation_windows(const WindowedDataset& data, std::size_t stride, std::size_t limit,
                                            bool skip_missing);

/// Per-channel metrics of `forecaster` against the watt targets of `windows`.
/// nRMSE ranges come from the dataset's normalization parameters.
MetricReport evaluate_forecaster(const std::string& model, const WindowedDataset& data,
                                 std::span<const std::size_t> windows, const Forecaster& forecaster,
                                 ExecPolicy policy = ExecPolicy::parallel, int jobs = 0);

}  // namespace seqdispatch
