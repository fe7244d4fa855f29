#pragma once

// JSON and CSV emitters. Every JSON report has a `results` object, which is
// a pure function of the inputs, and a `meta` object holding timestamps and
// durations.

#include <filesystem>
#include <string>
#include <vector>

#include "filterloss/analysis.hpp"
#include "filterloss/dataset.hpp"
#include "filterloss/experiment.hpp"
#include "filterloss/resampling.hpp"
#include "filterloss/trainer.hpp"
#include "filterloss/weight_filter.hpp"
#include "json.hpp"

namespace filterloss {

using Json = nlohmann::ordered_json;

std::string format_double(double v);

Json distribution_json(const LabeledDataset& ds);
Json similarity_json(const LabelSimilarityReport& report);
Json cross_json(const std::vector<CrossClassRow>& rows);
Json resample_json(const ResampleResult& result);
Json weight_histogram_json(const std::vector<WeightClassSize>& bins);
Json eval_json(const EvalReport& report);
Json history_json(const std::vector<EpochRecord>& history);
Json bench_json(const BenchResult& bench);

std::string similarity_csv(const LabelSimilarityReport& report);
std::string cross_csv(const std::vector<CrossClassRow>& rows);
std::string history_csv(const std::vector<EpochRecord>& history);
std::string weight_histogram_csv(const std::vector<WeightClassSize>& bins);
// rows = strategies, columns = loss families; "acc mean±std / f1 mean±std"
std::string bench_table_csv(const BenchResult& bench, const std::vector<std::string>& losses);
std::string bench_cells_csv(const BenchResult& bench);

Json make_meta(double seconds);
Json make_report(Json results, Json meta);
// FNV-1a of the compact dump of `results`, as 16 hex digits
std::string results_digest(const Json& report);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& doc);

}  // namespace filterloss
