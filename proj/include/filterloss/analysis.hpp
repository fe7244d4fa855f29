#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "filterloss/dataset.hpp"

namespace filterloss {

enum class SimilarityReference {
  Pairwise,  // all unordered same-label pairs (default)
  Centroid,  // each sample against its class mean
};

struct ClassSimilarity {
  ClassId id = 0;
  std::string name;
  std::size_t n = 0;
  std::size_t pairs = 0;
  std::optional<double> mean_euclid;  // null when the class has < 2 samples
  std::optional<double> mean_cosine;
  std::size_t zero_norm_pairs = 0;  // pairs that took the cosine-0 convention
};

struct LabelSimilarityReport {
  SimilarityReference reference = SimilarityReference::Pairwise;
  std::vector<ClassSimilarity> classes;

  const ClassSimilarity* find(std::string_view name) const;
};

inline constexpr std::size_t kDefaultMaxPairs = 5000;

/// Within-label similarity. A class with more than `max_pairs_per_class`
/// unordered pairs is summarized over a uniform seeded sample of that many
/// distinct pairs; otherwise every pair i<j is visited in row-major order.
/// Cosine is dot / (|a| |b|), with 0 when either vector has zero norm.
LabelSimilarityReport pairwise_stats(const LabeledDataset& ds,
                                     std::size_t max_pairs_per_class = kDefaultMaxPairs,
                                     std::uint64_t seed = 0,
                                     SimilarityReference reference = SimilarityReference::Pairwise);

struct CrossClassRow {
  std::string name;
  ClassSimilarity a;
  ClassSimilarity b;
  std::optional<double> delta_euclid;  // b - a
  std::optional<double> delta_cosine;
};

/// Matches classes by name. Throws MissingClass naming the first shared class
/// absent from either side, ShapeMismatch on differing feature widths.
std::vector<CrossClassRow> cross_dataset_report(
    const LabeledDataset& a, const LabeledDataset& b,
    const std::vector<std::string>& shared_class_names,
    std::size_t max_pairs_per_class = kDefaultMaxPairs, std::uint64_t seed = 0,
    SimilarityReference reference = SimilarityReference::Pairwise);

/// Class names present in both datasets, in `a`'s class order.
std::vector<std::string> shared_class_names(const LabeledDataset& a, const LabeledDataset& b);

}  // namespace filterloss
