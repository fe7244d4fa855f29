#include "filterloss/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "filterloss/error.hpp"
#include "filterloss/random.hpp"

namespace filterloss {

using nlohmann::json;
using nlohmann::ordered_json;

void ExperimentConfig::validate() const {
  require(schema_version == kConfigSchemaVersion, ErrorKind::Config,
          "unsupported schema_version " + std::to_string(schema_version));
  try {
    source.validate();
    target.validate();
    pretrain.validate();
    finetune.validate();
    pretrain_loss.validate();
    for (const LossSpec& l : losses) l.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  require(source.n_classes() == target.n_classes(), ErrorKind::Config,
          "source and target must have the same number of classes");
  require(source.dim == target.dim, ErrorKind::Config, "source and target dims differ");
  require(test_frac > 0.0 && test_frac < 1.0, ErrorKind::Config, "test_frac must lie in (0, 1)");
  require(!strategies.empty(), ErrorKind::Config, "strategy list is empty");
  require(!losses.empty(), ErrorKind::Config, "loss list is empty");
  require(replicates >= 1, ErrorKind::Config, "replicates must be >= 1");
  for (const auto& s : strategies) parse_strategy(s);
  require(std::ranges::all_of(model.hidden, [](std::size_t w) { return w >= 1; }),
          ErrorKind::Config, "hidden widths must be >= 1");
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig c;
  c.source.class_counts = {500, 500, 500, 500, 500, 500};
  c.source.dim = 32;
  c.source.cluster_spread = 2.5;
  c.source.noise_floor = 1.0;
  c.source.label_noise_frac = 0.0;
  c.target.class_counts = {500, 400, 300, 60, 25, 15};
  c.target.dim = 32;
  c.target.cluster_spread = 2.5;
  c.target.noise_floor = 3.0;
  c.target.label_noise_frac = 0.10;
  c.model.hidden = {64, 64};
  c.model.residual = true;
  c.pretrain.learning_rate = 0.01;
  c.pretrain.epochs = 10;
  c.pretrain.batch_size = 32;
  c.pretrain_loss.family = LossFamily::CrossEntropy;
  c.finetune.learning_rate = 0.2;
  c.finetune.epochs = 10;
  c.finetune.batch_size = 32;
  for (LossFamily f : {LossFamily::LabelSmooth, LossFamily::Focal, LossFamily::FocalLogits,
                       LossFamily::LabelSmoothFocal}) {
    LossSpec l;
    l.family = f;
    c.losses.push_back(l);
  }
  c.strategies = default_strategy_names();
  c.replicates = 5;
  return c;
}

// ---- JSON ------------------------------------------------------------------

namespace {

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("config key '") + key + "': " + e.what());
  }
}

SyntheticSpec synthetic_from_json(const json& doc, SyntheticSpec s) {
  s.class_counts = get_or(doc, "class_counts", s.class_counts);
  s.dim = get_or(doc, "dim", s.dim);
  s.cluster_spread = get_or(doc, "cluster_spread", s.cluster_spread);
  s.noise_floor = get_or(doc, "noise_floor", s.noise_floor);
  s.label_noise_frac = get_or(doc, "label_noise_frac", s.label_noise_frac);
  s.seed = get_or(doc, "seed", s.seed);
  return s;
}

ordered_json synthetic_to_json(const SyntheticSpec& s) {
  return {{"class_counts", s.class_counts}, {"dim", s.dim},
          {"cluster_spread", s.cluster_spread}, {"noise_floor", s.noise_floor},
          {"label_noise_frac", s.label_noise_frac}, {"seed", s.seed}};
}

TrainConfig train_from_json(const json& doc, TrainConfig t) {
  t.learning_rate = get_or(doc, "learning_rate", t.learning_rate);
  t.epochs = get_or(doc, "epochs", t.epochs);
  t.batch_size = get_or(doc, "batch_size", t.batch_size);
  t.full_batch = get_or(doc, "full_batch", t.full_batch);
  t.shuffle_seed = get_or(doc, "shuffle_seed", t.shuffle_seed);
  const std::string norm = get_or<std::string>(
      doc, "weight_normalization",
      t.normalization == WeightNormalization::SampleCount ? "sample_count" : "weight_sum");
  require(norm == "sample_count" || norm == "weight_sum", ErrorKind::Config,
          "weight_normalization must be sample_count or weight_sum");
  t.normalization =
      norm == "sample_count" ? WeightNormalization::SampleCount : WeightNormalization::WeightSum;
  return t;
}

ordered_json train_to_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"full_batch", t.full_batch},
          {"shuffle_seed", t.shuffle_seed},
          {"weight_normalization",
           t.normalization == WeightNormalization::SampleCount ? "sample_count" : "weight_sum"}};
}

LossSpec loss_from_json(const json& doc) {
  LossSpec l;
  if (doc.is_string()) {
    l.family = parse_loss_family(doc.get<std::string>());
    return l;
  }
  try {
    l.family = parse_loss_family(get_or<std::string>(doc, "family", "ce"));
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  l.gamma = get_or(doc, "gamma", l.gamma);
  l.epsilon = get_or(doc, "epsilon", l.epsilon);
  l.prob_floor = get_or(doc, "prob_floor", l.prob_floor);
  return l;
}

ordered_json loss_to_json(const LossSpec& l) {
  return {{"family", loss_family_name(l.family)},
          {"gamma", l.gamma},
          {"epsilon", l.epsilon},
          {"prob_floor", l.prob_floor}};
}

std::string_view normalization_name(Normalization n) {
  switch (n) {
    case Normalization::None: return "none";
    case Normalization::Source: return "source";
    case Normalization::PerDomain: return "per_domain";
  }
  return "none";
}

Normalization parse_normalization(std::string_view s) {
  if (s == "none") return Normalization::None;
  if (s == "source") return Normalization::Source;
  if (s == "per_domain") return Normalization::PerDomain;
  fail(ErrorKind::Config, "normalization must be none, source or per_domain");
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  require(doc.is_object(), ErrorKind::Config, "config must be a JSON object");
  require(doc.contains("schema_version"), ErrorKind::Config, "config lacks schema_version");
  ExperimentConfig c = default_experiment_config();
  c.schema_version = get_or(doc, "schema_version", c.schema_version);
  c.seed = get_or(doc, "seed", c.seed);
  if (doc.contains("source")) c.source = synthetic_from_json(doc.at("source"), c.source);
  if (doc.contains("target")) c.target = synthetic_from_json(doc.at("target"), c.target);
  c.test_frac = get_or(doc, "test_frac", c.test_frac);
  c.clean_eval = get_or(doc, "clean_eval", c.clean_eval);
  c.normalization = parse_normalization(
      get_or<std::string>(doc, "normalization", std::string(normalization_name(c.normalization))));
  if (doc.contains("model")) {
    const json& m = doc.at("model");
    c.model.hidden = get_or(m, "hidden", c.model.hidden);
    c.model.residual = get_or(m, "residual", c.model.residual);
    c.model.conv_stem = get_or(m, "conv_stem", c.model.conv_stem);
    c.model.conv_channels = get_or(m, "conv_channels", c.model.conv_channels);
  }
  if (doc.contains("pretrain")) {
    c.pretrain = train_from_json(doc.at("pretrain"), c.pretrain);
    if (doc.at("pretrain").contains("loss")) {
      c.pretrain_loss = loss_from_json(doc.at("pretrain").at("loss"));
    }
  }
  if (doc.contains("finetune")) {
    const json& f = doc.at("finetune");
    c.finetune = train_from_json(f, c.finetune);
    c.fine_tune.trainable = get_or(f, "trainable", c.fine_tune.trainable);
    c.fine_tune.reinit_head = get_or(f, "reinit_head", c.fine_tune.reinit_head);
  }
  if (doc.contains("sampling")) {
    const json& s = doc.at("sampling");
    SamplingSettings& t = c.fine_tune.sampling;
    t.enn_k = get_or(s, "enn_k", t.enn_k);
    t.smote_k = get_or(s, "smote_k", t.smote_k);
    t.adasyn_k = get_or(s, "adasyn_k", t.adasyn_k);
    t.adasyn_beta = get_or(s, "adasyn_beta", t.adasyn_beta);
    t.alpha_min = get_or(s, "alpha_min", t.alpha_min);
    if (s.contains("weight_table") && !s.at("weight_table").is_null()) {
      t.weight_table = get_or<std::vector<double>>(s, "weight_table", {});
    }
  }
  if (doc.contains("losses")) {
    c.losses.clear();
    for (const json& l : doc.at("losses")) c.losses.push_back(loss_from_json(l));
  }
  if (doc.contains("strategies")) {
    c.strategies = get_or<std::vector<std::string>>(doc, "strategies", {});
  }
  c.replicates = get_or(doc, "replicates", c.replicates);
  c.jobs = get_or(doc, "jobs", c.jobs);
  c.analysis_max_pairs = get_or(doc, "analysis_max_pairs", c.analysis_max_pairs);
  c.output_dir = get_or(doc, "output_dir", c.output_dir);
  c.validate();
  return c;
}

ordered_json config_to_json(const ExperimentConfig& c) {
  ordered_json losses = ordered_json::array();
  for (const LossSpec& l : c.losses) losses.push_back(loss_to_json(l));
  ordered_json pretrain = train_to_json(c.pretrain);
  pretrain["loss"] = loss_to_json(c.pretrain_loss);
  ordered_json finetune = train_to_json(c.finetune);
  finetune["trainable"] = c.fine_tune.trainable;
  finetune["reinit_head"] = c.fine_tune.reinit_head;
  const SamplingSettings& s = c.fine_tune.sampling;
  ordered_json sampling = {{"enn_k", s.enn_k},
                           {"smote_k", s.smote_k},
                           {"adasyn_k", s.adasyn_k},
                           {"adasyn_beta", s.adasyn_beta},
                           {"alpha_min", s.alpha_min},
                           {"weight_table", nullptr}};
  if (s.weight_table) sampling["weight_table"] = *s.weight_table;
  return {{"schema_version", c.schema_version},
          {"seed", c.seed},
          {"source", synthetic_to_json(c.source)},
          {"target", synthetic_to_json(c.target)},
          {"test_frac", c.test_frac},
          {"clean_eval", c.clean_eval},
          {"normalization", normalization_name(c.normalization)},
          {"model",
           {{"hidden", c.model.hidden},
            {"residual", c.model.residual},
            {"conv_stem", c.model.conv_stem},
            {"conv_channels", c.model.conv_channels}}},
          {"pretrain", pretrain},
          {"finetune", finetune},
          {"sampling", sampling},
          {"losses", losses},
          {"strategies", c.strategies},
          {"replicates", c.replicates},
          {"jobs", c.jobs},
          {"analysis_max_pairs", c.analysis_max_pairs},
          {"output_dir", c.output_dir}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Config, "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

// ---- data and pretraining --------------------------------------------------

std::uint64_t replicate_seed(const ExperimentConfig& config, std::size_t replicate) {
  return derive_seed(config.seed, static_cast<std::uint64_t>(replicate));
}

namespace {

DomainData make_domain(const SyntheticSpec& spec_in, const Matrix& centroids, double test_frac,
                       bool clean_eval, std::uint64_t seed) {
  SyntheticSpec spec = spec_in;
  spec.seed = derive_seed(seed, spec_in.seed);
  spec.label_noise_frac = 0.0;
  const SyntheticDataset generated = synth_generate(spec, centroids);
  Split split = stratified_split(generated.dataset, test_frac, derive_seed(seed, "split"));
  if (spec_in.label_noise_frac > 0.0) {
    split.train = flip_labels(split.train, spec_in.label_noise_frac, derive_seed(seed, "noise"));
    if (!clean_eval) {
      split.test =
          flip_labels(split.test, spec_in.label_noise_frac, derive_seed(seed, "noise-test"));
    }
  }
  return {std::move(split.train), std::move(split.test)};
}

void normalize_domain(DomainData& domain, const Normalizer& norm) {
  domain.train = apply_normalizer(norm, domain.train);
  domain.test = apply_normalizer(norm, domain.test);
}

}  // namespace

PreparedData generate_data(const ExperimentConfig& config, std::size_t replicate) {
  const std::uint64_t rs = replicate_seed(config, replicate);
  PreparedData data;
  data.centroids = default_centroids(config.source.n_classes(), config.source.dim);
  data.source = make_domain(config.source, data.centroids, config.test_frac, config.clean_eval,
                            derive_seed(rs, "source"));
  data.target = make_domain(config.target, data.centroids, config.test_frac, config.clean_eval,
                            derive_seed(rs, "target"));
  return data;
}

void normalize_data(PreparedData& data, Normalization mode) {
  switch (mode) {
    case Normalization::None: break;
    case Normalization::Source: {
      const Normalizer norm = fit_normalizer(data.source.train);
      normalize_domain(data.source, norm);
      normalize_domain(data.target, norm);
      break;
    }
    case Normalization::PerDomain: {
      const Normalizer source_norm = fit_normalizer(data.source.train);
      const Normalizer target_norm = fit_normalizer(data.target.train);
      normalize_domain(data.source, source_norm);
      normalize_domain(data.target, target_norm);
      break;
    }
  }
}

PreparedData prepare_data(const ExperimentConfig& config, std::size_t replicate) {
  PreparedData data = generate_data(config, replicate);
  normalize_data(data, config.normalization);
  return data;
}

PretrainResult pretrain(const ExperimentConfig& config, const PreparedData& data,
                        std::size_t replicate) {
  const std::uint64_t rs = replicate_seed(config, replicate);
  ModelSpec spec = config.model;
  spec.input_dim = data.source.train.d();
  spec.num_classes = data.source.train.num_classes();
  spec.init_seed = derive_seed(rs, "init");
  PretrainResult result;
  result.params = init_model(spec);
  TrainConfig tc = config.pretrain;
  tc.shuffle_seed = derive_seed(rs, "pretrain-shuffle");
  TrainHooks hooks;
  hooks.eval = &data.source.test;
  result.history = train(result.params, data.source.train, {}, config.pretrain_loss, tc, hooks);
  result.source_eval = evaluate(result.params, data.source.test);
  return result;
}

std::uint64_t cell_seed(std::uint64_t base, std::string_view strategy, std::string_view loss,
                        std::size_t replicate) {
  return derive_seed(derive_seed(derive_seed(base, strategy), loss),
                     static_cast<std::uint64_t>(replicate));
}

// ---- benchmark grid --------------------------------------------------------

const SummaryCell* BenchResult::find(std::string_view strategy, std::string_view loss) const {
  for (const auto& s : summary) {
    if (s.strategy == strategy && s.loss == loss) return &s;
  }
  return nullptr;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - mean) * (x - mean);
  return {mean, std::sqrt(sq / static_cast<double>(v.size()))};
}

template <typename Task>
void run_pool(std::size_t tasks, std::size_t jobs, Task&& task) {
  std::size_t workers = jobs ? jobs : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, tasks);
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < tasks; i = next++) task(i);
  };
  std::vector<std::jthread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(loop);
  loop();
}

}  // namespace

std::vector<SummaryCell> summarize(const std::vector<CellResult>& cells,
                                   const std::vector<std::string>& strategies,
                                   const std::vector<std::string>& losses) {
  std::vector<SummaryCell> out;
  for (const auto& s : strategies) {
    for (const auto& l : losses) {
      std::vector<double> acc, f1, stab;
      for (const CellResult& c : cells) {
        if (c.strategy != s || c.loss != l || !c.ok) continue;
        acc.push_back(c.report.accuracy);
        f1.push_back(c.report.macro_f1);
        stab.push_back(c.stability);
      }
      SummaryCell cell{s, l, acc.size(), 0, 0, 0, 0, 0};
      std::tie(cell.accuracy_mean, cell.accuracy_std) = mean_std(acc);
      std::tie(cell.macro_f1_mean, cell.macro_f1_std) = mean_std(f1);
      cell.stability_mean = mean_std(stab).first;
      out.push_back(cell);
    }
  }
  return out;
}

BenchResult run_bench(const ExperimentConfig& config, const LogFn& log) {
  config.validate();
  std::vector<Strategy> strategies;
  std::vector<std::string> strategy_names;
  for (const auto& s : config.strategies) {
    strategies.push_back(parse_strategy(s));
    strategy_names.push_back(strategies.back().name());
  }
  std::vector<std::string> loss_names;
  for (const LossSpec& l : config.losses) loss_names.push_back(std::string(loss_family_name(l.family)));

  // Data and pretrained source model per replicate, shared read-only by cells.
  std::vector<PreparedData> data(config.replicates);
  std::vector<ModelParams> sources(config.replicates);
  std::vector<std::string> replicate_error(config.replicates);
  run_pool(config.replicates, config.jobs, [&](std::size_t r) {
    try {
      data[r] = prepare_data(config, r);
      sources[r] = pretrain(config, data[r], r).params;
    } catch (const std::exception& e) {
      replicate_error[r] = std::string("pretraining failed: ") + e.what();
    }
  });
  if (log) log("pretrained " + std::to_string(config.replicates) + " source model(s)");

  BenchResult result;
  const std::size_t per_strategy = config.losses.size() * config.replicates;
  result.cells.resize(strategies.size() * per_strategy);
  std::mutex log_mutex;
  run_pool(result.cells.size(), config.jobs, [&](std::size_t idx) {
    const std::size_t si = idx / per_strategy;
    const std::size_t li = (idx % per_strategy) / config.replicates;
    const std::size_t r = idx % config.replicates;
    CellResult& cell = result.cells[idx];
    cell.strategy = strategy_names[si];
    cell.loss = loss_names[li];
    cell.replicate = r;
    if (!replicate_error[r].empty()) {
      cell.error = replicate_error[r];
      return;
    }
    try {
      const std::uint64_t seed = cell_seed(config.seed, cell.strategy, cell.loss, r);
      FineTuneSettings settings = config.fine_tune;
      settings.seed = derive_seed(seed, "settings");
      TrainConfig tc = config.finetune;
      tc.shuffle_seed = derive_seed(seed, "shuffle");
      StrategyOutcome outcome = run_strategy(strategies[si], sources[r], data[r].target.train,
                                             data[r].target.test, config.losses[li], tc, settings);
      cell.report = std::move(outcome.report);
      cell.history = std::move(outcome.history);
      cell.train_size = outcome.train_size;
      cell.stability = accuracy_stddev(cell.history);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    if (log) {
      std::lock_guard lock(log_mutex);
      log(cell.strategy + " / " + cell.loss + " / r" + std::to_string(r) +
          (cell.ok ? " acc=" + std::to_string(cell.report.accuracy) +
                         " f1=" + std::to_string(cell.report.macro_f1)
                   : " FAILED: " + cell.error));
    }
  });
  result.any_failed = std::ranges::any_of(result.cells, [](const CellResult& c) { return !c.ok; });
  result.summary = summarize(result.cells, strategy_names, loss_names);
  return result;
}

}  // namespace filterloss
