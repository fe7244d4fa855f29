#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "filterloss/dataset.hpp"
#include "filterloss/resampling.hpp"

namespace filterloss {

/// Non-decreasing weights in [0, 1]; entry j is the weight of a sample kept
/// by exactly j of the undersamplers, so a table for k samplers has k + 1 entries.
class WeightTable {
 public:
  explicit WeightTable(std::vector<double> alphas);

  std::span<const double> alphas() const noexcept { return alphas_; }
  std::size_t size() const noexcept { return alphas_.size(); }
  double operator[](std::size_t count) const { return alphas_.at(count); }

 private:
  std::vector<double> alphas_;
};

/// alpha_j = alpha_min + (1 - alpha_min) * j / n_samplers, j = 0..n_samplers.
WeightTable default_weight_table(std::size_t n_samplers, double alpha_min = 0.1);

struct WeightVector {
  std::vector<double> omegas;

  std::size_t size() const noexcept { return omegas.size(); }
  static WeightVector ones(std::size_t n) { return {std::vector<double>(n, 1.0)}; }
};

/// count_i = number of keep sets containing i.
std::vector<std::size_t> count_memberships(std::size_t n,
                                           std::span<const std::vector<std::size_t>> keep_sets);

/// Number of samplers whose keep set contains each row. Each sampler runs on
/// the same input independently; failures are rethrown with the sampler name.
std::vector<std::size_t> keep_counts(const LabeledDataset& ds,
                                     std::span<const UndersamplerSpec> samplers);

WeightVector weights_from_counts(std::span<const std::size_t> counts, const WeightTable& table);

/// The weight filter: omega_i = alpha[count_i].
WeightVector assign_weights(const LabeledDataset& ds, std::span<const UndersamplerSpec> samplers,
                            const WeightTable& table);

struct WeightClassSize {
  double weight = 0.0;
  std::size_t count = 0;
};

/// One bin per table entry, in table order.
std::vector<WeightClassSize> weight_histogram(std::span<const std::size_t> counts,
                                              const WeightTable& table);

/// One-column CSV with header `weight`, rows aligned to the dataset.
void save_weights_csv(const WeightVector& weights, const std::filesystem::path& path);
WeightVector load_weights_csv(const std::filesystem::path& path);

}  // namespace filterloss
