// filterloss command line: data generation, analysis, resampling, weight
// assignment, pretraining, fine-tuning and the benchmark grid.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "filterloss/analysis.hpp"
#include "filterloss/dataset.hpp"
#include "filterloss/error.hpp"
#include "filterloss/experiment.hpp"
#include "filterloss/model.hpp"
#include "filterloss/random.hpp"
#include "filterloss/report.hpp"
#include "filterloss/resampling.hpp"
#include "filterloss/trainer.hpp"
#include "filterloss/weight_filter.hpp"

namespace fs = std::filesystem;
using namespace filterloss;

namespace {

enum Exit { kOk = 0, kConfigError = 1, kRuntimeError = 2, kPartialGrid = 3 };

struct Globals {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

ExperimentConfig resolve_config(const Globals& g) {
  ExperimentConfig c = g.config_path.empty() ? default_experiment_config() : load_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (g.jobs) c.jobs = *g.jobs;
  if (!g.out.empty()) c.output_dir = g.out;
  c.validate();
  return c;
}

fs::path out_dir(const Globals& g, const std::string& fallback) {
  const fs::path dir = g.out.empty() ? fs::path(fallback) : fs::path(g.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ',' || ch == '+' || ch == '&') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<double> parse_table(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      require(used == item.size(), ErrorKind::Config, "bad weight table entry '" + item + "'");
    } catch (const std::logic_error&) {
      fail(ErrorKind::Config, "bad weight table entry '" + item + "'");
    }
  }
  return out;
}

void print_distribution(const std::string& title, const LabeledDataset& ds) {
  std::printf("%s (n=%zu, imbalance %.1f)\n", title.c_str(), ds.n(), imbalance_ratio(ds));
  for (const ClassShare& s : class_distribution(ds)) {
    std::printf("  %-8s %6zu  %6.2f%%\n", s.name.c_str(), s.count, 100.0 * s.proportion);
  }
}

int cmd_gen(const Globals& g) {
  Stopwatch clock;
  const ExperimentConfig c = resolve_config(g);
  const fs::path dir = out_dir(g, c.output_dir);
  const PreparedData data = generate_data(c, 0);
  save_csv(data.source.train, dir / "source_train.csv");
  save_csv(data.source.test, dir / "source_test.csv");
  save_csv(data.target.train, dir / "target_train.csv");
  save_csv(data.target.test, dir / "target_test.csv");
  auto spec_json = [](const SyntheticSpec& spec) {
    const auto [lo, hi] = std::ranges::minmax(spec.class_counts);
    return Json{{"class_counts", spec.class_counts},
                {"imbalance_ratio", static_cast<double>(hi) / static_cast<double>(lo)},
                {"noise_floor", spec.noise_floor},
                {"label_noise_frac", spec.label_noise_frac}};
  };
  Json results = {{"source", spec_json(c.source)},
                  {"target", spec_json(c.target)},
                  {"source_train", distribution_json(data.source.train)},
                  {"source_test", distribution_json(data.source.test)},
                  {"target_train", distribution_json(data.target.train)},
                  {"target_test", distribution_json(data.target.test)}};
  write_json(dir / "distribution.json", make_report(results, make_meta(clock.seconds())));
  std::printf("target imbalance ratio %.1f\n", results["target"]["imbalance_ratio"].get<double>());
  print_distribution("source_train", data.source.train);
  print_distribution("target_train", data.target.train);
  std::printf("wrote 4 CSV files and distribution.json to %s\n", dir.string().c_str());
  return kOk;
}

struct AnalyzeArgs {
  std::vector<std::string> paths;
  std::size_t max_pairs = kDefaultMaxPairs;
  std::string reference = "pairwise";
};

int cmd_analyze(const Globals& g, const AnalyzeArgs& a) {
  Stopwatch clock;
  require(a.reference == "pairwise" || a.reference == "centroid", ErrorKind::Config,
          "--reference must be pairwise or centroid");
  const SimilarityReference ref =
      a.reference == "pairwise" ? SimilarityReference::Pairwise : SimilarityReference::Centroid;
  const std::uint64_t seed = g.seed.value_or(0);
  const fs::path dir = out_dir(g, "out");
  const LabeledDataset first = load_csv(a.paths[0]);
  if (a.paths.size() == 1) {
    const LabelSimilarityReport report = pairwise_stats(first, a.max_pairs, seed, ref);
    write_json(dir / "similarity.json",
               make_report(similarity_json(report), make_meta(clock.seconds())));
    write_text(dir / "similarity.csv", similarity_csv(report));
    std::cout << similarity_csv(report);
    return kOk;
  }
  const LabeledDataset second = load_csv(a.paths[1]);
  const auto shared = shared_class_names(first, second);
  require(!shared.empty(), ErrorKind::MissingClass, "the datasets share no class names");
  const auto rows = cross_dataset_report(first, second, shared, a.max_pairs, seed, ref);
  write_json(dir / "cross.json", make_report(cross_json(rows), make_meta(clock.seconds())));
  write_text(dir / "cross.csv", cross_csv(rows));
  std::cout << cross_csv(rows);
  return kOk;
}

struct ResampleArgs {
  std::string data;
  std::string method = "enn";
  std::size_t k = 0;
  double beta = 1.0;
};

int cmd_resample(const Globals& g, const ResampleArgs& a) {
  Stopwatch clock;
  const fs::path dir = out_dir(g, "out");
  const std::uint64_t seed = g.seed.value_or(1);
  const LabeledDataset ds = load_csv(a.data);
  ResampleResult result;
  if (a.method == "ros" || a.method == "random_over") {
    result = random_oversample(ds, seed);
  } else if (a.method == "smote") {
    result = smote(ds, a.k ? a.k : kDefaultSmoteK, seed);
  } else if (a.method == "adasyn") {
    result = adasyn(ds, a.k ? a.k : kDefaultAdasynK, a.beta, seed);
  } else {
    UndersamplerSpec spec;
    try {
      spec.method = parse_undersampler(a.method);
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, e.what());
    }
    if (a.k) spec.k = a.k;
    spec.seed = seed;
    result = run_undersampler(ds, spec);
  }
  const LabeledDataset out = apply_resample(ds, result);
  save_csv(out, dir / "resampled.csv");
  Json results = resample_json(result);
  results["distribution"] = distribution_json(out);
  write_json(dir / "resample.json", make_report(results, make_meta(clock.seconds())));
  print_distribution(result.method, out);
  return kOk;
}

struct WeightsArgs {
  std::string data;
  std::string samplers = "enn,oss";
  std::string table;
  std::size_t k = kDefaultEnnK;
};

int cmd_weights(const Globals& g, const WeightsArgs& a) {
  Stopwatch clock;
  const fs::path dir = out_dir(g, "out");
  const std::uint64_t seed = g.seed.value_or(1);
  std::vector<UndersamplerSpec> specs;
  for (const auto& name : split_list(a.samplers)) {
    UndersamplerSpec spec;
    try {
      spec.method = parse_undersampler(name);
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, e.what());
    }
    spec.k = a.k;
    spec.seed = derive_seed(seed, name);
    specs.push_back(spec);
  }
  require(!specs.empty(), ErrorKind::Config, "no samplers given");
  std::optional<WeightTable> table;
  try {
    table = a.table.empty() ? default_weight_table(specs.size()) : WeightTable(parse_table(a.table));
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  require(table->size() == specs.size() + 1, ErrorKind::Config,
          "weight table must have " + std::to_string(specs.size() + 1) + " entries (samplers + 1), got " +
              std::to_string(table->size()));
  const LabeledDataset ds = load_csv(a.data);
  const auto counts = keep_counts(ds, specs);
  const WeightVector weights = weights_from_counts(counts, *table);
  const auto bins = weight_histogram(counts, *table);
  save_weights_csv(weights, dir / "weights.csv");
  write_text(dir / "weight_histogram.csv", weight_histogram_csv(bins));
  Json samplers = Json::array();
  for (const auto& s : specs) samplers.push_back(s.name());
  Json results = {{"samplers", samplers},
                  {"table", table->alphas()},
                  {"n", ds.n()},
                  {"histogram", weight_histogram_json(bins)}};
  write_json(dir / "weights.json", make_report(results, make_meta(clock.seconds())));
  std::cout << weight_histogram_csv(bins);
  return kOk;
}

int cmd_pretrain(const Globals& g) {
  Stopwatch clock;
  const ExperimentConfig c = resolve_config(g);
  const fs::path dir = out_dir(g, c.output_dir);
  const PreparedData data = prepare_data(c, 0);
  const PretrainResult result = pretrain(c, data, 0);
  save_model(result.params, dir / "model.bin");
  Json results = {{"history", history_json(result.history)},
                  {"source_eval", eval_json(result.source_eval)}};
  write_json(dir / "pretrain.json", make_report(results, make_meta(clock.seconds())));
  write_text(dir / "pretrain_history.csv", history_csv(result.history));
  std::printf("pretrained: source accuracy %.4f, macro-F1 %.4f -> %s\n", result.source_eval.accuracy,
              result.source_eval.macro_f1, (dir / "model.bin").string().c_str());
  return kOk;
}

struct FinetuneArgs {
  std::string model;
  std::string strategy = "filterloss:enn";
  std::string loss;
};

int cmd_finetune(const Globals& g, const FinetuneArgs& a) {
  Stopwatch clock;
  const ExperimentConfig c = resolve_config(g);
  const fs::path dir = out_dir(g, c.output_dir);
  const fs::path model_path = a.model.empty() ? dir / "model.bin" : fs::path(a.model);
  require(fs::exists(model_path), ErrorKind::MissingFile, "model file not found: " + model_path.string());
  const ModelParams source = load_model(model_path);
  Strategy strategy;
  LossSpec loss = c.losses.front();
  try {
    strategy = parse_strategy(a.strategy);
    if (!a.loss.empty()) {
      loss = LossSpec{};
      loss.family = parse_loss_family(a.loss);
    }
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  const PreparedData data = prepare_data(c, 0);
  const std::string loss_name(loss_family_name(loss.family));
  const std::uint64_t seed = cell_seed(c.seed, strategy.name(), loss_name, 0);
  FineTuneSettings settings = c.fine_tune;
  settings.seed = derive_seed(seed, "settings");
  TrainConfig tc = c.finetune;
  tc.shuffle_seed = derive_seed(seed, "shuffle");
  const StrategyOutcome outcome =
      run_strategy(strategy, source, data.target.train, data.target.test, loss, tc, settings);
  save_model(outcome.params, dir / "finetuned.bin");
  Json results = {{"strategy", strategy.name()},
                  {"loss", loss_name},
                  {"train_size", outcome.train_size},
                  {"stability", accuracy_stddev(outcome.history)},
                  {"eval", eval_json(outcome.report)},
                  {"history", history_json(outcome.history)}};
  write_json(dir / "finetune.json", make_report(results, make_meta(clock.seconds())));
  write_text(dir / "finetune_history.csv", history_csv(outcome.history));
  std::printf("%s / %s: accuracy %.4f, macro-F1 %.4f\n", strategy.name().c_str(), loss_name.c_str(),
              outcome.report.accuracy, outcome.report.macro_f1);
  return kOk;
}

int cmd_bench(const Globals& g, bool quiet) {
  Stopwatch clock;
  const ExperimentConfig c = resolve_config(g);
  const fs::path dir = out_dir(g, c.output_dir);
  LogFn log;
  if (!quiet) log = [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); };
  const BenchResult bench = run_bench(c, log);
  std::vector<std::string> losses;
  for (const auto& l : c.losses) losses.emplace_back(loss_family_name(l.family));
  const Json report = make_report(bench_json(bench), make_meta(clock.seconds()));
  write_json(dir / "bench.json", report);
  write_text(dir / "bench_table.csv", bench_table_csv(bench, losses));
  write_text(dir / "bench_cells.csv", bench_cells_csv(bench));
  std::ostringstream histories;
  histories << "strategy,loss,replicate,epoch,train_loss,eval_accuracy,eval_macro_f1\n";
  for (const auto& cell : bench.cells) {
    for (const auto& e : cell.history) {
      histories << cell.strategy << ',' << cell.loss << ',' << cell.replicate << ',' << e.epoch << ','
                << format_double(e.train_loss) << ','
                << (e.eval_accuracy ? format_double(*e.eval_accuracy) : "") << ','
                << (e.eval_macro_f1 ? format_double(*e.eval_macro_f1) : "") << '\n';
    }
  }
  write_text(dir / "bench_histories.csv", histories.str());
  std::cout << bench_table_csv(bench, losses);
  std::printf("%zu cells, results digest %s\n", bench.cells.size(), results_digest(report).c_str());
  return bench.any_failed ? kPartialGrid : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"filterloss: weighted-loss fine-tuning toolkit for imbalanced, noisy data"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output directory");
  app.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { g.seed = s; },
                                         "base seed");
  app.add_option_function<std::size_t>("--jobs", [&](const std::size_t& j) { g.jobs = j; },
                                       "worker threads for the grid (0 = all cores)");
  app.fallthrough();

  auto* gen = app.add_subcommand("gen", "generate source/target train/test CSVs");

  AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand("analyze", "within-class similarity of one or two datasets");
  analyze->add_option("datasets", analyze_args.paths, "one or two CSV files")->required()->expected(1, 2);
  analyze->add_option("--max-pairs", analyze_args.max_pairs, "pair budget per class");
  analyze->add_option("--reference", analyze_args.reference, "pairwise or centroid");

  ResampleArgs resample_args;
  auto* resample = app.add_subcommand("resample", "run one resampler on a CSV");
  resample->add_option("--data", resample_args.data, "input CSV")->required();
  resample->add_option("--method", resample_args.method,
                       "rus, tomek, enn, oss, ros, smote or adasyn");
  resample->add_option("--k", resample_args.k, "neighbour count");
  resample->add_option("--beta", resample_args.beta, "ADASYN balance level");

  WeightsArgs weights_args;
  auto* weights = app.add_subcommand("weights", "assign FilterLoss sample weights");
  weights->add_option("--data", weights_args.data, "input CSV")->required();
  weights->add_option("--samplers", weights_args.samplers, "comma separated undersamplers");
  weights->add_option("--table", weights_args.table, "weight table, samplers + 1 entries");
  weights->add_option("--k", weights_args.k, "ENN neighbour count");

  auto* pre = app.add_subcommand("pretrain", "train the source model");

  FinetuneArgs finetune_args;
  auto* fine = app.add_subcommand("finetune", "fine-tune a source model on the target");
  fine->add_option("--model", finetune_args.model, "source model file (default <out>/model.bin)");
  fine->add_option("--strategy", finetune_args.strategy, "none, ros, smote, adasyn, rus, tomek, enn, oss or filterloss:<samplers>");
  fine->add_option("--loss", finetune_args.loss, "loss family (default: first in config)");

  bool quiet = false;
  auto* bench = app.add_subcommand("bench", "strategy x loss x seed grid");
  bench->add_flag("--quiet", quiet, "no per-cell log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) return cmd_gen(g);
    if (*analyze) return cmd_analyze(g, analyze_args);
    if (*resample) return cmd_resample(g, resample_args);
    if (*weights) return cmd_weights(g, weights_args);
    if (*pre) return cmd_pretrain(g);
    if (*fine) return cmd_finetune(g, finetune_args);
    if (*bench) return cmd_bench(g, quiet);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::Config ? kConfigError : kRuntimeError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return kOk;
}
