#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "filterloss/matrix.hpp"

namespace filterloss {

using ClassId = int;

/// Feature matrix plus integer labels in [0, C). Immutable once built; the
/// constructor enforces finiteness and label range.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(Matrix features, std::vector<ClassId> labels,
                 std::vector<std::string> class_names);

  const Matrix& features() const noexcept { return features_; }
  std::span<const ClassId> labels() const noexcept { return labels_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  std::size_t n() const noexcept { return labels_.size(); }
  std::size_t d() const noexcept { return features_.cols(); }
  std::size_t num_classes() const noexcept { return class_names_.size(); }

  std::span<const double> row(std::size_t i) const { return features_.row(i); }
  ClassId label(std::size_t i) const { return labels_[i]; }

  std::vector<std::size_t> class_counts() const;
  std::vector<std::size_t> indices_of(ClassId c) const;
  std::optional<ClassId> find_class(std::string_view name) const;

  /// Rows in the given order; class names are kept even if a class vanishes.
  LabeledDataset subset(std::span<const std::size_t> indices) const;
  LabeledDataset with_rows_appended(const Matrix& features,
                                    std::span<const ClassId> labels) const;
  LabeledDataset with_labels(std::vector<ClassId> labels) const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  Matrix features_;
  std::vector<ClassId> labels_;
  std::vector<std::string> class_names_;
};

// ---- CSV -------------------------------------------------------------------

/// Reads `f0,...,f{d-1},label`. Class ids follow first appearance of each label
/// token. Errors: MissingFile, EmptyFile, RaggedRow, NonNumeric, NonFinite.
LabeledDataset load_csv(const std::filesystem::path& path);

/// Writes the format `load_csv` reads, features at 9 significant digits.
void save_csv(const LabeledDataset& ds, const std::filesystem::path& path);

// ---- synthetic data --------------------------------------------------------

struct SyntheticSpec {
  std::vector<std::size_t> class_counts;
  std::size_t dim = 2;
  double cluster_spread = 1.0;
  double noise_floor = 0.0;
  double label_noise_frac = 0.0;
  std::uint64_t seed = 0;

  std::size_t n_classes() const noexcept { return class_counts.size(); }
  std::size_t total() const noexcept;
  void validate() const;
};

struct SyntheticDataset {
  LabeledDataset dataset;
  Matrix centroids;
};

/// Seed of the generator used for centroids when none are supplied. Fixed so
/// that a source/target pair generated separately shares its class signal.
inline constexpr std::uint64_t kCentroidSeed = 0x2018'2024ULL;
inline constexpr double kCentroidScale = 4.0;

Matrix default_centroids(std::size_t n_classes, std::size_t dim);

/// Class c contributes class_counts[c] rows (in class order) drawn as
/// centroid + N(0, spread^2 I) + N(0, noise_floor^2 I); then
/// round(label_noise_frac * n) distinct rows get a uniformly random different
/// label. Deterministic given the seed.
SyntheticDataset synth_generate(const SyntheticSpec& spec,
                                const std::optional<Matrix>& shared_centroids = std::nullopt);

/// The label-flipping step of `synth_generate`, usable on any dataset.
LabeledDataset flip_labels(const LabeledDataset& ds, double frac, std::uint64_t seed);

// ---- splitting and preprocessing -------------------------------------------

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct Split {
  LabeledDataset train;
  LabeledDataset test;
};

/// Per class, the test side gets round(test_frac * count) rows clamped to
/// [1, count - 1]. Index lists are ascending, disjoint and cover the dataset.
SplitIndices stratified_split_indices(const LabeledDataset& ds, double test_frac,
                                      std::uint64_t seed);
Split stratified_split(const LabeledDataset& ds, double test_frac, std::uint64_t seed);

inline constexpr double kStdFloor = 1e-12;

struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;
};

Normalizer fit_normalizer(const LabeledDataset& ds);
LabeledDataset apply_normalizer(const Normalizer& norm, const LabeledDataset& ds);

struct ClassShare {
  std::string name;
  std::size_t count = 0;
  double proportion = 0.0;
};

std::vector<ClassShare> class_distribution(const LabeledDataset& ds);

/// Largest class count over smallest nonzero class count.
double imbalance_ratio(const LabeledDataset& ds);

}  // namespace filterloss
