#include "filterloss/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "filterloss/error.hpp"
#include "filterloss/random.hpp"

namespace filterloss {

void TrainConfig::validate() const {
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), ErrorKind::InvalidArgument,
          "learning_rate must be finite and >= 0");
  require(epochs >= 1, ErrorKind::InvalidArgument, "epochs must be >= 1");
  require(batch_size >= 1, ErrorKind::InvalidArgument, "batch_size must be >= 1");
}

std::vector<EpochRecord> train(ModelParams& params, const LabeledDataset& ds,
                               std::span<const double> omega, const LossSpec& loss,
                               const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  loss.validate();
  require(ds.n() >= 1, ErrorKind::InvalidArgument, "cannot train on an empty dataset");
  require(ds.d() == params.spec.input_dim, ErrorKind::ShapeMismatch,
          "dataset width " + std::to_string(ds.d()) + " vs model input " +
              std::to_string(params.spec.input_dim));
  require(ds.num_classes() == params.spec.num_classes, ErrorKind::ShapeMismatch,
          "dataset has " + std::to_string(ds.num_classes()) + " classes, model head has " +
              std::to_string(params.spec.num_classes));
  require(omega.empty() || omega.size() == ds.n(), ErrorKind::InvalidArgument,
          "weight vector length " + std::to_string(omega.size()) + " vs " +
              std::to_string(ds.n()) + " training rows");
  if (hooks.eval) {
    require(hooks.eval->d() == ds.d() && hooks.eval->num_classes() == ds.num_classes(),
            ErrorKind::ShapeMismatch, "eval set does not match the training set");
  }

  const bool weighted = !omega.empty();
  const std::size_t n = ds.n();
  const std::size_t batch = config.full_batch ? n : std::min(config.batch_size, n);
  std::vector<std::size_t> order(n);
  std::vector<EpochRecord> history;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (!config.full_batch) {
      Rng rng(derive_seed(config.shuffle_seed, static_cast<std::uint64_t>(epoch)));
      std::shuffle(order.begin(), order.end(), rng);
    }
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += batch, ++batch_index) {
      const std::size_t stop = std::min(start + batch, n);
      const std::span<const std::size_t> rows(order.data() + start, stop - start);
      const Matrix x = ds.features().gather_rows(rows);
      std::vector<ClassId> y;
      y.reserve(rows.size());
      for (std::size_t i : rows) y.push_back(ds.label(i));

      const ForwardResult fwd = forward(params, x);
      const PerSampleLoss per_sample = per_sample_loss(loss, fwd.logits, y);
      ReducedLoss reduced;
      if (weighted) {
        std::vector<double> w;
        w.reserve(rows.size());
        for (std::size_t i : rows) w.push_back(omega[i]);
        reduced = reduce_weighted(per_sample, w, config.normalization);
      } else {
        reduced = reduce_mean(per_sample);
      }
      require(std::isfinite(reduced.value), ErrorKind::NonFinite,
              "non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                  std::to_string(batch_index));
      const Gradients grads = backward(params, fwd.cache, reduced.grad_logits);
      try {
        sgd_step(params, grads, config.learning_rate);
      } catch (const Error& e) {
        throw e.with_context("epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
      }
      loss_sum += reduced.value * static_cast<double>(rows.size());
      if (hooks.after_step) hooks.after_step({epoch, batch_index, reduced.value}, params);
    }

    EpochRecord record{epoch, loss_sum / static_cast<double>(n), std::nullopt, std::nullopt};
    if (hooks.eval) {
      const EvalReport report = evaluate(params, *hooks.eval);
      record.eval_accuracy = report.accuracy;
      record.eval_macro_f1 = report.macro_f1;
    }
    history.push_back(record);
  }
  return history;
}

// ---- evaluation ------------------------------------------------------------

std::vector<ClassId> predict(const ModelParams& params, const Matrix& features) {
  const Matrix logits = predict_logits(params, features);
  std::vector<ClassId> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    out[i] = static_cast<ClassId>(std::ranges::max_element(row) - row.begin());
  }
  return out;
}

EvalReport evaluate_predictions(std::span<const ClassId> truth, std::span<const ClassId> predicted,
                                const std::vector<std::string>& class_names) {
  require(!truth.empty(), ErrorKind::InvalidArgument, "cannot evaluate on an empty set");
  require(truth.size() == predicted.size(), ErrorKind::ShapeMismatch,
          "truth and prediction lengths differ");
  const std::size_t c_count = class_names.size();
  EvalReport report;
  report.total = truth.size();
  report.confusion.assign(c_count, std::vector<std::size_t>(c_count, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    require(truth[i] >= 0 && static_cast<std::size_t>(truth[i]) < c_count &&
                predicted[i] >= 0 && static_cast<std::size_t>(predicted[i]) < c_count,
            ErrorKind::InvalidArgument, "class id out of range in evaluation");
    ++report.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  std::size_t correct = 0;
  double f1_sum = 0.0;
  double weighted_sum = 0.0;
  for (std::size_t c = 0; c < c_count; ++c) {
    ClassMetrics m;
    m.name = class_names[c];
    const std::size_t tp = report.confusion[c][c];
    correct += tp;
    for (std::size_t k = 0; k < c_count; ++k) {
      m.support += report.confusion[c][k];
      m.predicted += report.confusion[k][c];
    }
    m.precision = m.predicted ? static_cast<double>(tp) / static_cast<double>(m.predicted) : 0.0;
    m.recall = m.support ? static_cast<double>(tp) / static_cast<double>(m.support) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.absent = m.support == 0 && m.predicted == 0;
    f1_sum += m.f1;
    weighted_sum += m.f1 * static_cast<double>(m.support);
    report.per_class.push_back(std::move(m));
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.total);
  report.macro_f1 = c_count ? f1_sum / static_cast<double>(c_count) : 0.0;
  report.weighted_f1 = weighted_sum / static_cast<double>(report.total);
  return report;
}

EvalReport evaluate(const ModelParams& params, const LabeledDataset& ds) {
  require(ds.n() >= 1, ErrorKind::InvalidArgument, "cannot evaluate on an empty set");
  require(ds.num_classes() == params.spec.num_classes, ErrorKind::ShapeMismatch,
          "eval set has " + std::to_string(ds.num_classes()) + " classes, model head has " +
              std::to_string(params.spec.num_classes));
  const auto predicted = predict(params, ds.features());
  return evaluate_predictions(ds.labels(), predicted, ds.class_names());
}

double accuracy_stddev(std::span<const EpochRecord> history, std::size_t first, std::size_t last) {
  std::vector<double> values;
  for (const EpochRecord& r : history) {
    if (r.epoch >= first && r.epoch <= last && r.eval_accuracy) values.push_back(*r.eval_accuracy);
  }
  if (values.empty()) return 0.0;
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(values.size()));
}

// ---- strategies ------------------------------------------------------------

std::string Strategy::name() const {
  switch (kind) {
    case StrategyKind::None: return "none";
    case StrategyKind::Ros: return "ros";
    case StrategyKind::Smote: return "smote";
    case StrategyKind::Adasyn: return "adasyn";
    case StrategyKind::Rus: return "rus";
    case StrategyKind::Tomek: return "tomek";
    case StrategyKind::Enn: return "enn";
    case StrategyKind::Oss: return "oss";
    case StrategyKind::FilterLoss: {
      std::string out = "filterloss:";
      for (std::size_t i = 0; i < samplers.size(); ++i) {
        if (i) out += '+';
        out += undersampler_name(samplers[i]);
      }
      return out;
    }
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text) {
  static constexpr std::pair<std::string_view, StrategyKind> kSimple[] = {
      {"none", StrategyKind::None},   {"ros", StrategyKind::Ros},
      {"smote", StrategyKind::Smote}, {"adasyn", StrategyKind::Adasyn},
      {"rus", StrategyKind::Rus},     {"tomek", StrategyKind::Tomek},
      {"enn", StrategyKind::Enn},     {"oss", StrategyKind::Oss},
  };
  for (const auto& [name, kind] : kSimple) {
    if (text == name) return {kind, {}};
  }
  constexpr std::string_view prefix = "filterloss:";
  if (text.starts_with(prefix)) {
    Strategy s{StrategyKind::FilterLoss, {}};
    std::string_view rest = text.substr(prefix.size());
    while (true) {
      const std::size_t sep = rest.find_first_of("+&,");
      const std::string_view token = rest.substr(0, sep);
      try {
        s.samplers.push_back(parse_undersampler(token));
      } catch (const Error& e) {
        throw Error(ErrorKind::Config, "strategy '" + std::string(text) + "': " + e.what());
      }
      if (sep == std::string_view::npos) break;
      rest.remove_prefix(sep + 1);
    }
    return s;
  }
  fail(ErrorKind::Config, "unknown strategy '" + std::string(text) +
                              "' (expected none, ros, smote, adasyn, rus, tomek, enn, oss or "
                              "filterloss:<samplers>)");
}

std::vector<std::string> default_strategy_names() {
  return {"none", "ros",           "smote",          "adasyn",
          "rus",  "tomek",         "enn",            "oss",
          "filterloss:oss", "filterloss:enn", "filterloss:enn+oss"};
}

namespace {

UndersamplerSpec sampler_spec(UndersamplerMethod method, const SamplingSettings& s,
                              std::uint64_t seed) {
  return {method, s.enn_k, derive_seed(seed, undersampler_name(method))};
}

}  // namespace

PreparedTraining prepare_training(const Strategy& strategy, const LabeledDataset& train_ds,
                                  const SamplingSettings& s, std::uint64_t seed) {
  const std::uint64_t rs = derive_seed(seed, "resample");
  switch (strategy.kind) {
    case StrategyKind::None: return {train_ds, {}};
    case StrategyKind::Ros: return {apply_resample(train_ds, random_oversample(train_ds, rs)), {}};
    case StrategyKind::Smote:
      return {apply_resample(train_ds, smote(train_ds, s.smote_k, rs)), {}};
    case StrategyKind::Adasyn:
      return {apply_resample(train_ds, adasyn(train_ds, s.adasyn_k, s.adasyn_beta, rs)), {}};
    case StrategyKind::Rus:
    case StrategyKind::Tomek:
    case StrategyKind::Enn:
    case StrategyKind::Oss: {
      const auto method = strategy.kind == StrategyKind::Rus     ? UndersamplerMethod::RandomUnder
                          : strategy.kind == StrategyKind::Tomek ? UndersamplerMethod::Tomek
                          : strategy.kind == StrategyKind::Enn   ? UndersamplerMethod::Enn
                                                                 : UndersamplerMethod::Oss;
      return {apply_resample(train_ds, run_undersampler(train_ds, sampler_spec(method, s, rs))),
              {}};
    }
    case StrategyKind::FilterLoss: {
      require(!strategy.samplers.empty(), ErrorKind::Config, "filterloss needs >= 1 sampler");
      std::vector<UndersamplerSpec> specs;
      for (UndersamplerMethod m : strategy.samplers) specs.push_back(sampler_spec(m, s, rs));
      const WeightTable table = s.weight_table ? WeightTable(*s.weight_table)
                                               : default_weight_table(specs.size(), s.alpha_min);
      return {train_ds, assign_weights(train_ds, specs, table).omegas};
    }
  }
  fail(ErrorKind::Config, "unknown strategy");
}

StrategyOutcome run_strategy(const Strategy& strategy, const ModelParams& source_model,
                             const LabeledDataset& target_train, const LabeledDataset& target_eval,
                             const LossSpec& loss, const TrainConfig& config,
                             const FineTuneSettings& settings, const TrainHooks& hooks) {
  StrategyOutcome outcome;
  outcome.params = source_model;
  if (settings.reinit_head) {
    reinitialize_head(outcome.params, target_train.num_classes(), settings.seed);
  }
  set_trainable(outcome.params, settings.trainable);

  PreparedTraining prepared =
      prepare_training(strategy, target_train, settings.sampling, settings.seed);
  outcome.train_size = prepared.data.n();
  TrainHooks train_hooks = hooks;
  train_hooks.eval = &target_eval;
  outcome.history =
      train(outcome.params, prepared.data, prepared.omega, loss, config, train_hooks);
  outcome.report = evaluate(outcome.params, target_eval);
  outcome.omega = std::move(prepared.omega);
  return outcome;
}

}  // namespace filterloss
