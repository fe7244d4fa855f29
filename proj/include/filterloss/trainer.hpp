#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "filterloss/dataset.hpp"
#include "filterloss/losses.hpp"
#include "filterloss/model.hpp"
#include "filterloss/resampling.hpp"
#include "filterloss/weight_filter.hpp"

namespace filterloss {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::uint64_t shuffle_seed = 0;
  // One batch holding every row in dataset order; no shuffling.
  bool full_batch = false;
  WeightNormalization normalization = WeightNormalization::SampleCount;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> eval_accuracy;
  std::optional<double> eval_macro_f1;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct StepInfo {
  std::size_t epoch = 0;  // 1-based
  std::size_t batch = 0;  // 0-based within the epoch
  double loss = 0.0;
};

struct TrainHooks {
  const LabeledDataset* eval = nullptr;
  std::function<void(const StepInfo&, const ModelParams&)> after_step;
};

/// Mini-batch SGD. Each epoch shuffles with a seed derived from
/// (shuffle_seed, epoch); every batch runs forward, per-sample loss, the
/// weighted reduction over the batch's slice of `omega` (divided by the batch
/// size), backward and one SGD step. An empty `omega` trains unweighted.
/// Throws NonFinite with epoch/batch coordinates when a loss blows up.
std::vector<EpochRecord> train(ModelParams& params, const LabeledDataset& ds,
                               std::span<const double> omega, const LossSpec& loss,
                               const TrainConfig& config, const TrainHooks& hooks = {});

struct ClassMetrics {
  std::string name;
  std::size_t support = 0;
  std::size_t predicted = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool absent = false;  // neither in truth nor in predictions
};

struct EvalReport {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
  std::vector<std::vector<std::size_t>> confusion;  // rows = truth, cols = prediction
  std::size_t total = 0;
};

/// Index of the largest logit; ties go to the lowest class id.
std::vector<ClassId> predict(const ModelParams& params, const Matrix& features);

EvalReport evaluate_predictions(std::span<const ClassId> truth, std::span<const ClassId> predicted,
                                const std::vector<std::string>& class_names);
EvalReport evaluate(const ModelParams& params, const LabeledDataset& ds);

/// Population standard deviation of eval accuracy over epochs [first, last]
/// (1-based, inclusive, clipped to the history).
double accuracy_stddev(std::span<const EpochRecord> history, std::size_t first = 2,
                       std::size_t last = 10);

// ---- strategies ------------------------------------------------------------

enum class StrategyKind { None, Ros, Smote, Adasyn, Rus, Tomek, Enn, Oss, FilterLoss };

struct Strategy {
  StrategyKind kind = StrategyKind::None;
  std::vector<UndersamplerMethod> samplers;  // FilterLoss only

  std::string name() const;
};

/// none, ros, smote, adasyn, rus, tomek, enn, oss, or filterloss:<a>[+<b>...]
/// (separators '+', '&' or ',').
Strategy parse_strategy(std::string_view text);

/// The eleven rows of the benchmark table.
std::vector<std::string> default_strategy_names();

struct SamplingSettings {
  std::size_t enn_k = kDefaultEnnK;
  std::size_t smote_k = kDefaultSmoteK;
  std::size_t adasyn_k = kDefaultAdasynK;
  double adasyn_beta = 1.0;
  double alpha_min = 0.1;
  std::optional<std::vector<double>> weight_table;  // overrides the default ramp
};

struct FineTuneSettings {
  std::string trainable = "fine_tune";
  bool reinit_head = true;
  SamplingSettings sampling;
  std::uint64_t seed = 0;  // resampler and head-initialization streams
};

struct StrategyOutcome {
  EvalReport report;
  std::vector<EpochRecord> history;
  std::size_t train_size = 0;
  std::vector<double> omega;  // FilterLoss only
  ModelParams params;
};

/// The resampled (or reweighted) training set a strategy trains on.
struct PreparedTraining {
  LabeledDataset data;
  std::vector<double> omega;  // empty: unweighted
};

PreparedTraining prepare_training(const Strategy& strategy, const LabeledDataset& train_ds,
                                  const SamplingSettings& sampling, std::uint64_t seed);

/// Copies the source model, applies the head policy and trainable pattern,
/// transforms the data per strategy, fine-tunes and evaluates.
StrategyOutcome run_strategy(const Strategy& strategy, const ModelParams& source_model,
                             const LabeledDataset& target_train, const LabeledDataset& target_eval,
                             const LossSpec& loss, const TrainConfig& config,
                             const FineTuneSettings& settings, const TrainHooks& hooks = {});

}  // namespace filterloss
