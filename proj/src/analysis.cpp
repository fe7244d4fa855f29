#include "filterloss/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <ranges>
#include <set>

#include "filterloss/error.hpp"
#include "filterloss/kernels.hpp"
#include "filterloss/random.hpp"

namespace filterloss {

const ClassSimilarity* LabelSimilarityReport::find(std::string_view name) const {
  for (const auto& c : classes) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

struct PairAccumulator {
  double euclid_sum = 0.0;
  double cosine_sum = 0.0;
  std::size_t count = 0;
  std::size_t zero_norm = 0;

  void add(std::span<const double> a, std::span<const double> b) {
    euclid_sum += std::sqrt(kernels::squared_distance(a, b));
    const double norm_a = std::sqrt(kernels::dot(a, a));
    const double norm_b = std::sqrt(kernels::dot(b, b));
    if (norm_a == 0.0 || norm_b == 0.0) {
      ++zero_norm;
    } else {
      cosine_sum += std::clamp(kernels::dot(a, b) / (norm_a * norm_b), -1.0, 1.0);
    }
    ++count;
  }
};

// Walks the sorted linear pair indices of an m-member class (i-major, i<j).
template <typename Visit>
void visit_pairs(std::size_t m, const std::vector<std::size_t>& sorted_linear, Visit&& visit) {
  std::size_t i = 0;
  std::size_t row_start = 0;  // linear index of pair (i, i+1)
  for (std::size_t k : sorted_linear) {
    while (k >= row_start + (m - 1 - i)) {
      row_start += m - 1 - i;
      ++i;
    }
    visit(i, i + 1 + (k - row_start));
  }
}

ClassSimilarity pairwise_for_class(const LabeledDataset& ds, ClassId c,
                                   std::size_t max_pairs, std::uint64_t seed) {
  const auto members = ds.indices_of(c);
  ClassSimilarity out{c, ds.class_names()[static_cast<std::size_t>(c)], members.size(), 0,
                      std::nullopt, std::nullopt, 0};
  const std::size_t m = members.size();
  if (m < 2) return out;

  PairAccumulator acc;
  auto add = [&](std::size_t a, std::size_t b) { acc.add(ds.row(members[a]), ds.row(members[b])); };
  const std::size_t total = m * (m - 1) / 2;
  if (total <= max_pairs) {
    for (std::size_t a = 0; a + 1 < m; ++a) {
      for (std::size_t b = a + 1; b < m; ++b) add(a, b);
    }
  } else {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
    std::vector<std::size_t> chosen;
    // Floyd's subset sampling; iota views are not forward iterators for std::sample
    std::set<std::size_t> picked;
    for (std::size_t j = total - max_pairs; j < total; ++j) {
      const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
      if (!picked.insert(t).second) picked.insert(j);
    }
    chosen.assign(picked.begin(), picked.end());
    visit_pairs(m, chosen, add);
  }
  out.pairs = acc.count;
  out.zero_norm_pairs = acc.zero_norm;
  out.mean_euclid = acc.euclid_sum / static_cast<double>(acc.count);
  out.mean_cosine = acc.cosine_sum / static_cast<double>(acc.count);
  return out;
}

ClassSimilarity centroid_for_class(const LabeledDataset& ds, ClassId c) {
  const auto members = ds.indices_of(c);
  ClassSimilarity out{c, ds.class_names()[static_cast<std::size_t>(c)], members.size(), 0,
                      std::nullopt, std::nullopt, 0};
  if (members.size() < 2) return out;
  std::vector<double> centroid(ds.d(), 0.0);
  for (std::size_t i : members) kernels::axpy(1.0, ds.row(i), centroid);
  for (double& v : centroid) v /= static_cast<double>(members.size());

  PairAccumulator acc;
  for (std::size_t i : members) acc.add(ds.row(i), centroid);
  out.pairs = acc.count;
  out.zero_norm_pairs = acc.zero_norm;
  out.mean_euclid = acc.euclid_sum / static_cast<double>(acc.count);
  out.mean_cosine = acc.cosine_sum / static_cast<double>(acc.count);
  return out;
}

}  // namespace

LabelSimilarityReport pairwise_stats(const LabeledDataset& ds, std::size_t max_pairs_per_class,
                                     std::uint64_t seed, SimilarityReference reference) {
  require(max_pairs_per_class >= 1, ErrorKind::InvalidArgument,
          "max_pairs_per_class must be >= 1");
  LabelSimilarityReport report;
  report.reference = reference;
  for (std::size_t c = 0; c < ds.num_classes(); ++c) {
    const auto id = static_cast<ClassId>(c);
    report.classes.push_back(reference == SimilarityReference::Pairwise
                                 ? pairwise_for_class(ds, id, max_pairs_per_class, seed)
                                 : centroid_for_class(ds, id));
  }
  return report;
}

std::vector<std::string> shared_class_names(const LabeledDataset& a, const LabeledDataset& b) {
  std::vector<std::string> out;
  for (const auto& name : a.class_names()) {
    if (b.find_class(name)) out.push_back(name);
  }
  return out;
}

std::vector<CrossClassRow> cross_dataset_report(const LabeledDataset& a, const LabeledDataset& b,
                                                const std::vector<std::string>& shared,
                                                std::size_t max_pairs_per_class,
                                                std::uint64_t seed,
                                                SimilarityReference reference) {
  require(a.d() == b.d(), ErrorKind::ShapeMismatch,
          "datasets differ in width: " + std::to_string(a.d()) + " vs " + std::to_string(b.d()));
  require(!shared.empty(), ErrorKind::MissingClass, "no shared classes to compare");
  for (const auto& name : shared) {
    require(a.find_class(name).has_value(), ErrorKind::MissingClass,
            "class '" + name + "' missing from the first dataset");
    require(b.find_class(name).has_value(), ErrorKind::MissingClass,
            "class '" + name + "' missing from the second dataset");
  }
  const auto stats_a = pairwise_stats(a, max_pairs_per_class, seed, reference);
  const auto stats_b = pairwise_stats(b, max_pairs_per_class, seed, reference);

  std::vector<CrossClassRow> rows;
  for (const auto& name : shared) {
    CrossClassRow row{name, *stats_a.find(name), *stats_b.find(name), std::nullopt, std::nullopt};
    if (row.a.mean_euclid && row.b.mean_euclid) {
      row.delta_euclid = *row.b.mean_euclid - *row.a.mean_euclid;
      row.delta_cosine = *row.b.mean_cosine - *row.a.mean_cosine;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace filterloss
