#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "filterloss/dataset.hpp"

namespace filterloss {

/// Rows produced by an oversampler. Row r was built from original row
/// parents[r] moved `lambdas[r]` of the way toward original row partners[r].
struct SyntheticSamples {
  Matrix features;
  std::vector<ClassId> labels;
  std::vector<std::size_t> parents;
  std::vector<std::size_t> partners;
  std::vector<double> lambdas;

  std::size_t size() const noexcept { return labels.size(); }
};

struct ResampleResult {
  std::vector<std::size_t> keep_indices;  // ascending, unique
  std::optional<SyntheticSamples> synthetic;
  std::string method;
  std::map<std::string, std::string> params;
};

/// Kept rows followed by synthetic rows.
LabeledDataset apply_resample(const LabeledDataset& ds, const ResampleResult& result);

// ---- undersamplers ---------------------------------------------------------
//
// Every undersampler applies the guard rule last: a class present in the
// input whose members were all removed gets all of them restored. The
// restored class names are listed in params["guard_restored"].

/// Every class cut to the minority count. For each class in id order the
/// member list is shuffled with one shared mt19937_64(seed) and its prefix kept.
ResampleResult random_undersample(const LabeledDataset& ds, std::uint64_t seed);

/// Mutual 1-NN pairs (self excluded) with differing labels, as (a, b), a < b.
std::vector<std::pair<std::size_t, std::size_t>> find_tomek_links(const LabeledDataset& ds);

/// Removes the member of each Tomek link whose class is globally larger;
/// both members when the two classes have equal counts.
ResampleResult tomek_links(const LabeledDataset& ds);

inline constexpr std::size_t kDefaultEnnK = 3;

/// Edited nearest neighbours, single simultaneous pass: a row is removed when
/// a strict majority (> k/2) of its k nearest neighbours carries a different
/// label. No strict majority keeps the row.
ResampleResult enn(const LabeledDataset& ds, std::size_t k = kDefaultEnnK);

/// One-sided selection. The minority is the smallest class (ties: lowest id).
/// For every other class, in id order: start from all minority rows plus one
/// random member, scan the remaining members in shuffled order and add each
/// one whose nearest retained row has a different label. The union of these
/// sets is then cleaned of Tomek links; minority rows are never removed.
ResampleResult oss(const LabeledDataset& ds, std::uint64_t seed);

enum class UndersamplerMethod { RandomUnder, Tomek, Enn, Oss };

struct UndersamplerSpec {
  UndersamplerMethod method = UndersamplerMethod::Enn;
  std::size_t k = kDefaultEnnK;  // used by ENN
  std::uint64_t seed = 0;        // used by random_under and OSS

  std::string name() const;
};

/// Accepts random_under|rus, tomek|tl, enn, oss.
UndersamplerMethod parse_undersampler(std::string_view name);
std::string_view undersampler_name(UndersamplerMethod method);

ResampleResult run_undersampler(const LabeledDataset& ds, const UndersamplerSpec& spec);

// ---- oversamplers ----------------------------------------------------------

/// Duplicates minority rows uniformly with replacement up to the majority count.
ResampleResult random_oversample(const LabeledDataset& ds, std::uint64_t seed);

/// Source of interpolation factors in [0, 1]; defaults to a seeded uniform draw.
using LambdaSource = std::function<double()>;

inline constexpr std::size_t kDefaultSmoteK = 5;
inline constexpr std::size_t kDefaultAdasynK = 5;

/// Per minority class, (majority - count) points x + lambda (x_nn - x) where x
/// is a random class member and x_nn one of its k same-class neighbours
/// (k clamped to count - 1). Throws for a minority class of size 1.
ResampleResult smote(const LabeledDataset& ds, std::size_t k, std::uint64_t seed,
                     const LambdaSource& lambda = {});

/// Rounded allocation round(r_i * g) with r = impurity / sum(impurity), or
/// uniform r when every impurity is zero.
std::vector<std::size_t> adasyn_allocation(std::span<const double> impurity, double g);

/// ADASYN: impurity from the k nearest neighbours over all classes, G =
/// beta (majority - count), interpolation toward same-class neighbours.
ResampleResult adasyn(const LabeledDataset& ds, std::size_t k, double beta, std::uint64_t seed,
                      const LambdaSource& lambda = {});

}  // namespace filterloss
