#pragma once

// End-to-end pipeline shared by the CLI and the acceptance suite: synthetic
// source/target generation, pretraining, and the strategy x loss x replicate
// benchmark grid.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "filterloss/analysis.hpp"
#include "filterloss/dataset.hpp"
#include "filterloss/losses.hpp"
#include "filterloss/model.hpp"
#include "filterloss/trainer.hpp"
#include "json.hpp"

namespace filterloss {

inline constexpr int kConfigSchemaVersion = 1;

enum class Normalization { None, Source, PerDomain };

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::uint64_t seed = 1;
  SyntheticSpec source;
  SyntheticSpec target;
  double test_frac = 0.2;
  // Label noise hits only the training split; evaluation labels stay clean.
  bool clean_eval = true;
  Normalization normalization = Normalization::PerDomain;
  ModelSpec model;  // input_dim / num_classes / init_seed are filled per run
  TrainConfig pretrain;
  LossSpec pretrain_loss;
  TrainConfig finetune;
  FineTuneSettings fine_tune;
  std::vector<LossSpec> losses;
  std::vector<std::string> strategies;
  std::size_t replicates = 1;
  std::size_t jobs = 0;  // 0: hardware concurrency
  std::size_t analysis_max_pairs = kDefaultMaxPairs;
  std::string output_dir = "out";

  void validate() const;
};

ExperimentConfig default_experiment_config();
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::ordered_json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

struct DomainData {
  LabeledDataset train;
  LabeledDataset test;
};

struct PreparedData {
  DomainData source;
  DomainData target;
  Matrix centroids;
};

/// Seeds of replicate r derive from (config.seed, r).
std::uint64_t replicate_seed(const ExperimentConfig& config, std::size_t replicate);
// Raw generated domains, before any standardisation.
PreparedData generate_data(const ExperimentConfig& config, std::size_t replicate);
void normalize_data(PreparedData& data, Normalization mode);
PreparedData prepare_data(const ExperimentConfig& config, std::size_t replicate);

struct PretrainResult {
  ModelParams params;
  std::vector<EpochRecord> history;
  EvalReport source_eval;
};

PretrainResult pretrain(const ExperimentConfig& config, const PreparedData& data,
                        std::size_t replicate);

std::uint64_t cell_seed(std::uint64_t base, std::string_view strategy, std::string_view loss,
                        std::size_t replicate);

struct CellResult {
  std::string strategy;
  std::string loss;
  std::size_t replicate = 0;
  bool ok = false;
  std::string error;
  EvalReport report;
  std::vector<EpochRecord> history;
  std::size_t train_size = 0;
  double stability = 0.0;  // eval-accuracy stddev over epochs 2..10
};

struct SummaryCell {
  std::string strategy;
  std::string loss;
  std::size_t ok_replicates = 0;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;
  double macro_f1_mean = 0.0;
  double macro_f1_std = 0.0;
  double stability_mean = 0.0;
};

struct BenchResult {
  std::vector<CellResult> cells;  // strategy-major, then loss, then replicate
  std::vector<SummaryCell> summary;
  bool any_failed = false;

  const SummaryCell* find(std::string_view strategy, std::string_view loss) const;
};

using LogFn = std::function<void(const std::string&)>;

/// Runs every (strategy, loss, replicate) cell on a bounded worker pool.
/// Cell failures are captured per cell. Results do not depend on the
/// scheduling order or the number of workers.
BenchResult run_bench(const ExperimentConfig& config, const LogFn& log = {});

std::vector<SummaryCell> summarize(const std::vector<CellResult>& cells,
                                   const std::vector<std::string>& strategies,
                                   const std::vector<std::string>& losses);

}  // namespace filterloss
