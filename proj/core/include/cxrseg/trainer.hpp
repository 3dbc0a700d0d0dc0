#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cxrseg/augment.hpp"
#include "cxrseg/dataset.hpp"
#include "cxrseg/losses.hpp"
#include "cxrseg/metrics.hpp"
#include "cxrseg/model.hpp"

namespace cxrseg {

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every tensor in `params`, reading each
/// tensor's accumulated gradient (a missing gradient counts as zero).
/// Throws NumericalError naming the parameter if a gradient is not finite;
/// nothing is updated in that case.
void adam_step(std::span<Tensor> params, std::span<const std::string> names, AdamState& state,
               const AdamConfig& config);

// ---------------------------------------------------------------------------
// training

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 4;
  AdamConfig adam;
  LossConfig loss;
  MixupConfig mixup;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // epochs; 0 = final checkpoint only
  bool eval_train = true;            // crisp metrics on the training set each epoch

  void validate() const;
};

/// Epoch budget by training-set size: 1000 for up to 10 images,
/// 500 for up to 20 and 50 beyond that.
std::size_t default_epochs(std::size_t train_size);

/// Optimizer steps per run: ceil(train_size / batch_size) * epochs.
std::size_t training_steps(std::size_t train_size, std::size_t epochs, std::size_t batch_size);

struct CurveRow {
  std::size_t epoch = 0;  // 1-based
  double train_dsc = 0.0;
  double train_iou = 0.0;
  double val_dsc = 0.0;
  double val_iou = 0.0;
  double loss = 0.0;  // mean training loss over the epoch's batches
};

struct CurveLog {
  std::vector<CurveRow> rows;

  /// `epoch,train_dsc,train_iou,val_dsc,val_iou,loss`, values printed with
  /// 17 significant digits so files compare bitwise across identical runs.
  void write_csv(const std::filesystem::path& path) const;
  static CurveLog read_csv(const std::filesystem::path& path);
};

struct TrainHooks {
  /// Called after each epoch's row is appended.
  std::function<void(const CurveRow&, ModelParams&)> on_epoch;
};

struct TrainResult {
  ModelParams model;
  CurveLog curves;
};

/// Full training loop. `val` may be empty (validation columns are then 0).
TrainResult train(const std::vector<Sample>& train_set, const std::vector<Sample>& val,
                  const ModelConfig& model_config, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Fraction of adjacent windows in which the `window`-epoch moving average of
/// `losses` does not increase.
double nonincreasing_window_fraction(const std::vector<double>& losses, std::size_t window = 10);

// ---------------------------------------------------------------------------
// evaluation

struct ImageMetrics {
  std::string id;
  CrispMetrics metrics;
};

struct EvalReport {
  std::vector<ImageMetrics> images;
  std::vector<MeanStd> dsc_per_class;  // indexed by class
  std::vector<MeanStd> iou_per_class;
  MeanStd mean_dsc;  // foreground mean, across images
  MeanStd mean_iou;
};

/// Crisp argmax metrics in evaluation mode; never updates parameters.
EvalReport evaluate(ModelParams& model, const std::vector<Sample>& samples,
                    std::size_t batch_size = 4);

/// Loads `ids`, checking that the preprocessing resolution matches the one
/// the checkpoint was trained at (metadata keys data.height / data.width).
EvalReport evaluate_checkpoint(Checkpoint& checkpoint, const Manifest& manifest,
                               const std::vector<std::string>& ids,
                               const PreprocessConfig& preprocess);

// ---------------------------------------------------------------------------
// metrics CSV and multi-run aggregation

struct MetricRow {
  std::uint64_t seed = 0;
  std::string split;
  std::string cls;  // lung, heart or mean
  double dsc = 0.0;
  double iou = 0.0;
};

/// Rows for lung, heart and their mean (background is never reported).
std::vector<MetricRow> metric_rows(std::uint64_t seed, const std::string& split,
                                   const EvalReport& report);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path);

struct AggregateRow {
  std::string split;
  std::string cls;
  MeanStd dsc;
  MeanStd iou;
};

/// Groups rows by (split, class) and reports mean and sample std across runs.
/// `expected_runs`, when non-zero, must equal every group's size.
std::vector<AggregateRow> aggregate_metrics(const std::vector<MetricRow>& rows,
                                            std::size_t expected_runs = 0);

}  // namespace cxrseg
