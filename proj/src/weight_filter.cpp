#include "filterloss/weight_filter.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "filterloss/error.hpp"

namespace filterloss {

WeightTable::WeightTable(std::vector<double> alphas) : alphas_(std::move(alphas)) {
  require(!alphas_.empty(), ErrorKind::InvalidArgument, "weight table is empty");
  for (std::size_t j = 0; j < alphas_.size(); ++j) {
    require(alphas_[j] >= 0.0 && alphas_[j] <= 1.0, ErrorKind::InvalidArgument,
            "weight table entry " + std::to_string(j) + " outside [0, 1]");
    require(j == 0 || alphas_[j - 1] <= alphas_[j], ErrorKind::InvalidArgument,
            "weight table must be non-decreasing (entry " + std::to_string(j) + ")");
  }
}

WeightTable default_weight_table(std::size_t n_samplers, double alpha_min) {
  require(n_samplers >= 1, ErrorKind::InvalidArgument, "default weight table needs >= 1 sampler");
  require(alpha_min >= 0.0 && alpha_min <= 1.0, ErrorKind::InvalidArgument,
          "alpha_min must lie in [0, 1]");
  std::vector<double> alphas(n_samplers + 1);
  for (std::size_t j = 0; j <= n_samplers; ++j) {
    alphas[j] = alpha_min +
                (1.0 - alpha_min) * static_cast<double>(j) / static_cast<double>(n_samplers);
  }
  alphas.back() = 1.0;
  return WeightTable(std::move(alphas));
}

std::vector<std::size_t> count_memberships(std::size_t n,
                                           std::span<const std::vector<std::size_t>> keep_sets) {
  std::vector<std::size_t> counts(n, 0);
  for (const auto& keep : keep_sets) {
    std::vector<bool> seen(n, false);
    for (std::size_t i : keep) {
      require(i < n, ErrorKind::InvalidArgument,
              "keep index " + std::to_string(i) + " out of range for n=" + std::to_string(n));
      if (!seen[i]) ++counts[i];
      seen[i] = true;
    }
  }
  return counts;
}

std::vector<std::size_t> keep_counts(const LabeledDataset& ds,
                                     std::span<const UndersamplerSpec> samplers) {
  require(!samplers.empty(), ErrorKind::InvalidArgument, "weight filter needs >= 1 sampler");
  std::vector<std::vector<std::size_t>> keep_sets;
  for (const UndersamplerSpec& spec : samplers) {
    try {
      keep_sets.push_back(run_undersampler(ds, spec).keep_indices);
    } catch (const Error& e) {
      throw e.with_context("sampler '" + spec.name() + "'");
    }
  }
  return count_memberships(ds.n(), keep_sets);
}

WeightVector weights_from_counts(std::span<const std::size_t> counts, const WeightTable& table) {
  WeightVector out;
  out.omegas.reserve(counts.size());
  for (std::size_t c : counts) {
    require(c < table.size(), ErrorKind::InvalidArgument,
            "keep count " + std::to_string(c) + " has no weight table entry");
    out.omegas.push_back(table[c]);
  }
  return out;
}

WeightVector assign_weights(const LabeledDataset& ds, std::span<const UndersamplerSpec> samplers,
                            const WeightTable& table) {
  require(table.size() == samplers.size() + 1, ErrorKind::InvalidArgument,
          "weight table has " + std::to_string(table.size()) + " entries; expected " +
              std::to_string(samplers.size() + 1) + " for " + std::to_string(samplers.size()) +
              " sampler(s)");
  const auto counts = keep_counts(ds, samplers);
  return weights_from_counts(counts, table);
}

std::vector<WeightClassSize> weight_histogram(std::span<const std::size_t> counts,
                                              const WeightTable& table) {
  std::vector<WeightClassSize> bins;
  for (double a : table.alphas()) bins.push_back({a, 0});
  for (std::size_t c : counts) {
    require(c < bins.size(), ErrorKind::InvalidArgument, "keep count exceeds table");
    ++bins[c].count;
  }
  return bins;
}

void save_weights_csv(const WeightVector& weights, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << "weight\n";
  char buf[64];
  for (double w : weights.omegas) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), w);
    out.write(buf, res.ptr - buf);
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

WeightVector load_weights_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::MissingFile, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::EmptyFile,
          path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "weight", ErrorKind::InvalidArgument, path.string() + ": header must be 'weight'");
  WeightVector out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double w = 0.0;
    const auto [end, ec] = std::from_chars(line.data(), line.data() + line.size(), w);
    require(ec == std::errc() && end == line.data() + line.size() && std::isfinite(w),
            ErrorKind::NonNumeric, path.string() + ": weight row " + std::to_string(row) +
                                       " is not a number");
    out.omegas.push_back(w);
  }
  return out;
}

}  // namespace filterloss
