#include "filterloss/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "filterloss/error.hpp"
#include "filterloss/kernels.hpp"
#include "filterloss/neighbors.hpp"
#include "filterloss/random.hpp"

namespace filterloss {

namespace {

std::vector<std::size_t> present_classes(const std::vector<std::size_t>& counts) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0) out.push_back(c);
  }
  return out;
}

void require_no_empty_class(const LabeledDataset& ds, std::string_view method) {
  const auto counts = ds.class_counts();
  require(ds.n() >= 1, ErrorKind::InvalidArgument, std::string(method) + ": empty dataset");
  for (std::size_t c = 0; c < counts.size(); ++c) {
    require(counts[c] > 0, ErrorKind::InvalidArgument,
            std::string(method) + ": class '" + ds.class_names()[c] + "' is empty");
  }
}

void require_two_classes(const LabeledDataset& ds, std::string_view method) {
  require(present_classes(ds.class_counts()).size() >= 2, ErrorKind::InvalidArgument,
          std::string(method) + " needs at least two classes present");
}

/// Turns removal flags into a keep list, restoring any class that would vanish.
ResampleResult finish_undersample(const LabeledDataset& ds, std::vector<bool> removed,
                                  std::string method, std::map<std::string, std::string> params) {
  const auto counts = ds.class_counts();
  std::vector<std::size_t> kept_per_class(counts.size(), 0);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (!removed[i]) ++kept_per_class[static_cast<std::size_t>(ds.label(i))];
  }
  std::string restored;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0 || kept_per_class[c] > 0) continue;
    for (std::size_t i = 0; i < ds.n(); ++i) {
      if (static_cast<std::size_t>(ds.label(i)) == c) removed[i] = false;
    }
    if (!restored.empty()) restored += ',';
    restored += ds.class_names()[c];
  }
  if (!restored.empty()) params["guard_restored"] = restored;

  ResampleResult result;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (!removed[i]) result.keep_indices.push_back(i);
  }
  result.method = std::move(method);
  result.params = std::move(params);
  return result;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

LabeledDataset apply_resample(const LabeledDataset& ds, const ResampleResult& result) {
  LabeledDataset out = ds.subset(result.keep_indices);
  if (result.synthetic && result.synthetic->size() > 0) {
    out = out.with_rows_appended(result.synthetic->features, result.synthetic->labels);
  }
  return out;
}

// ---- undersamplers ---------------------------------------------------------

ResampleResult random_undersample(const LabeledDataset& ds, std::uint64_t seed) {
  require_no_empty_class(ds, "random_under");
  const auto counts = ds.class_counts();
  const std::size_t target = *std::ranges::min_element(counts);
  Rng rng(seed);
  std::vector<bool> removed(ds.n(), true);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    auto members = ds.indices_of(static_cast<ClassId>(c));
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < target; ++k) removed[members[k]] = false;
  }
  return finish_undersample(ds, std::move(removed), "random_under",
                            {{"seed", std::to_string(seed)}, {"target", std::to_string(target)}});
}

std::vector<std::pair<std::size_t, std::size_t>> find_tomek_links(const LabeledDataset& ds) {
  std::vector<std::pair<std::size_t, std::size_t>> links;
  if (ds.n() < 2) return links;
  const NeighborIndex index(ds.features());
  std::vector<std::size_t> nearest(ds.n());
  for (std::size_t i = 0; i < ds.n(); ++i) nearest[i] = index.query_row(i, 1, true).front().index;
  for (std::size_t a = 0; a < ds.n(); ++a) {
    const std::size_t b = nearest[a];
    if (a < b && nearest[b] == a && ds.label(a) != ds.label(b)) links.emplace_back(a, b);
  }
  return links;
}

ResampleResult tomek_links(const LabeledDataset& ds) {
  require(ds.n() >= 2, ErrorKind::InvalidArgument, "tomek needs n >= 2");
  require_two_classes(ds, "tomek");
  const auto counts = ds.class_counts();
  std::vector<bool> removed(ds.n(), false);
  const auto links = find_tomek_links(ds);
  for (const auto& [a, b] : links) {
    const std::size_t count_a = counts[static_cast<std::size_t>(ds.label(a))];
    const std::size_t count_b = counts[static_cast<std::size_t>(ds.label(b))];
    if (count_a >= count_b) removed[a] = true;
    if (count_b >= count_a) removed[b] = true;
  }
  return finish_undersample(ds, std::move(removed), "tomek",
                            {{"links", std::to_string(links.size())}});
}

ResampleResult enn(const LabeledDataset& ds, std::size_t k) {
  require(k >= 1, ErrorKind::InvalidArgument, "enn: k must be >= 1");
  require(ds.n() > k, ErrorKind::InvalidArgument,
          "enn: need n > k (n=" + std::to_string(ds.n()) + ", k=" + std::to_string(k) + ")");
  const NeighborIndex index(ds.features());
  std::vector<bool> removed(ds.n(), false);
  std::vector<std::size_t> tally(ds.num_classes(), 0);
  for (std::size_t i = 0; i < ds.n(); ++i) {
    std::ranges::fill(tally, 0);
    for (const Neighbor& nb : index.query_row(i, k, true)) {
      ++tally[static_cast<std::size_t>(ds.label(nb.index))];
    }
    for (std::size_t c = 0; c < tally.size(); ++c) {
      if (2 * tally[c] > k) {
        removed[i] = static_cast<ClassId>(c) != ds.label(i);
        break;
      }
    }
  }
  return finish_undersample(ds, std::move(removed), "enn", {{"k", std::to_string(k)}});
}

ResampleResult oss(const LabeledDataset& ds, std::uint64_t seed) {
  require(ds.n() >= 2, ErrorKind::InvalidArgument, "oss needs n >= 2");
  require_two_classes(ds, "oss");
  const auto counts = ds.class_counts();
  std::size_t minority = counts.size();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] > 0 && (minority == counts.size() || counts[c] < counts[minority])) minority = c;
  }
  const auto minority_id = static_cast<ClassId>(minority);
  const auto minority_members = ds.indices_of(minority_id);

  Rng rng(seed);
  std::vector<bool> retained(ds.n(), false);
  for (std::size_t i : minority_members) retained[i] = true;

  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (c == minority || counts[c] == 0) continue;
    auto members = ds.indices_of(static_cast<ClassId>(c));
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    const std::size_t seed_pos = pick(rng);
    std::vector<std::size_t> condensed = minority_members;
    condensed.push_back(members[seed_pos]);
    members.erase(members.begin() + static_cast<std::ptrdiff_t>(seed_pos));
    std::shuffle(members.begin(), members.end(), rng);

    for (std::size_t x : members) {
      std::size_t best = condensed.front();
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t r : condensed) {
        const double dist = kernels::squared_distance(ds.row(x), ds.row(r));
        if (dist < best_dist || (dist == best_dist && r < best)) {
          best = r;
          best_dist = dist;
        }
      }
      if (ds.label(best) != static_cast<ClassId>(c)) condensed.push_back(x);
    }
    for (std::size_t i : condensed) retained[i] = true;
  }

  std::vector<std::size_t> retained_idx;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    if (retained[i]) retained_idx.push_back(i);
  }
  std::vector<bool> removed(ds.n(), true);
  for (std::size_t i : retained_idx) removed[i] = false;

  const LabeledDataset condensed_ds = ds.subset(retained_idx);
  const auto links = find_tomek_links(condensed_ds);
  for (const auto& [la, lb] : links) {
    const std::size_t a = retained_idx[la];
    const std::size_t b = retained_idx[lb];
    const ClassId ya = ds.label(a);
    const ClassId yb = ds.label(b);
    if (ya == minority_id) {
      removed[b] = true;
    } else if (yb == minority_id) {
      removed[a] = true;
    } else {
      const std::size_t count_a = counts[static_cast<std::size_t>(ya)];
      const std::size_t count_b = counts[static_cast<std::size_t>(yb)];
      if (count_a >= count_b) removed[a] = true;
      if (count_b >= count_a) removed[b] = true;
    }
  }
  return finish_undersample(ds, std::move(removed), "oss",
                            {{"seed", std::to_string(seed)},
                             {"minority", ds.class_names()[minority]},
                             {"condensed", std::to_string(retained_idx.size())},
                             {"links", std::to_string(links.size())}});
}

std::string_view undersampler_name(UndersamplerMethod method) {
  switch (method) {
    case UndersamplerMethod::RandomUnder: return "rus";
    case UndersamplerMethod::Tomek: return "tomek";
    case UndersamplerMethod::Enn: return "enn";
    case UndersamplerMethod::Oss: return "oss";
  }
  return "unknown";
}

std::string UndersamplerSpec::name() const { return std::string(undersampler_name(method)); }

UndersamplerMethod parse_undersampler(std::string_view name) {
  if (name == "rus" || name == "random_under") return UndersamplerMethod::RandomUnder;
  if (name == "tomek" || name == "tl") return UndersamplerMethod::Tomek;
  if (name == "enn") return UndersamplerMethod::Enn;
  if (name == "oss") return UndersamplerMethod::Oss;
  fail(ErrorKind::InvalidArgument, "unknown undersampler '" + std::string(name) +
                                       "' (expected rus, tomek, enn or oss)");
}

ResampleResult run_undersampler(const LabeledDataset& ds, const UndersamplerSpec& spec) {
  require(spec.k >= 1, ErrorKind::InvalidArgument, "undersampler k must be >= 1");
  switch (spec.method) {
    case UndersamplerMethod::RandomUnder: return random_undersample(ds, spec.seed);
    case UndersamplerMethod::Tomek: return tomek_links(ds);
    case UndersamplerMethod::Enn: return enn(ds, spec.k);
    case UndersamplerMethod::Oss: return oss(ds, spec.seed);
  }
  fail(ErrorKind::InvalidArgument, "unknown undersampler");
}

// ---- oversamplers ----------------------------------------------------------

namespace {

struct SyntheticBuilder {
  const LabeledDataset& ds;
  SyntheticSamples out;

  explicit SyntheticBuilder(const LabeledDataset& source) : ds(source) {
    out.features = Matrix(0, source.d());
  }

  void emit(std::size_t parent, std::size_t partner, double lambda) {
    Matrix row(1, ds.d());
    const auto x = ds.row(parent);
    const auto y = ds.row(partner);
    for (std::size_t j = 0; j < ds.d(); ++j) row(0, j) = x[j] + lambda * (y[j] - x[j]);
    out.features.append_rows(row);
    out.labels.push_back(ds.label(parent));
    out.parents.push_back(parent);
    out.partners.push_back(partner);
    out.lambdas.push_back(lambda);
  }
};

LambdaSource uniform_lambda(Rng& rng) {
  return [&rng] { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); };
}

/// k nearest same-class neighbours of every member, as original indices.
std::vector<std::vector<std::size_t>> within_class_neighbors(const LabeledDataset& ds,
                                                             const std::vector<std::size_t>& members,
                                                             std::size_t k) {
  const NeighborIndex index(ds.features().gather_rows(members));
  std::vector<std::vector<std::size_t>> out(members.size());
  for (std::size_t m = 0; m < members.size(); ++m) {
    for (std::size_t local : knn_indices(index, m, k, true)) out[m].push_back(members[local]);
  }
  return out;
}

void note_clamp(std::map<std::string, std::string>& params, const LabeledDataset& ds,
                std::size_t c, std::size_t k_eff) {
  params["k_clamped." + ds.class_names()[c]] = std::to_string(k_eff);
}

}  // namespace

ResampleResult random_oversample(const LabeledDataset& ds, std::uint64_t seed) {
  require_no_empty_class(ds, "ros");
  const auto counts = ds.class_counts();
  const std::size_t majority = *std::ranges::max_element(counts);
  Rng rng(seed);
  SyntheticBuilder builder(ds);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] >= majority) continue;
    const auto members = ds.indices_of(static_cast<ClassId>(c));
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    for (std::size_t t = counts[c]; t < majority; ++t) {
      const std::size_t parent = members[pick(rng)];
      builder.emit(parent, parent, 0.0);
    }
  }
  return {all_indices(ds.n()), std::move(builder.out), "ros", {{"seed", std::to_string(seed)}}};
}

ResampleResult smote(const LabeledDataset& ds, std::size_t k, std::uint64_t seed,
                     const LambdaSource& lambda) {
  require(k >= 1, ErrorKind::InvalidArgument, "smote: k must be >= 1");
  require_no_empty_class(ds, "smote");
  const auto counts = ds.class_counts();
  const std::size_t majority = *std::ranges::max_element(counts);
  Rng rng(seed);
  const LambdaSource draw_lambda = lambda ? lambda : uniform_lambda(rng);
  std::map<std::string, std::string> params{{"k", std::to_string(k)},
                                            {"seed", std::to_string(seed)}};
  SyntheticBuilder builder(ds);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] >= majority) continue;
    require(counts[c] >= 2, ErrorKind::InvalidArgument,
            "smote: class '" + ds.class_names()[c] + "' has a single sample");
    const auto members = ds.indices_of(static_cast<ClassId>(c));
    const std::size_t k_eff = std::min(k, members.size() - 1);
    if (k_eff < k) note_clamp(params, ds, c, k_eff);
    const auto neighbors = within_class_neighbors(ds, members, k_eff);
    std::uniform_int_distribution<std::size_t> pick_parent(0, members.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_neighbor(0, k_eff - 1);
    for (std::size_t t = counts[c]; t < majority; ++t) {
      const std::size_t m = pick_parent(rng);
      const std::size_t partner = neighbors[m][pick_neighbor(rng)];
      builder.emit(members[m], partner, draw_lambda());
    }
  }
  return {all_indices(ds.n()), std::move(builder.out), "smote", std::move(params)};
}

std::vector<std::size_t> adasyn_allocation(std::span<const double> impurity, double g) {
  std::vector<std::size_t> out(impurity.size(), 0);
  if (impurity.empty()) return out;
  const double total = std::accumulate(impurity.begin(), impurity.end(), 0.0);
  for (std::size_t i = 0; i < impurity.size(); ++i) {
    const double r = total > 0.0 ? impurity[i] / total
                                 : 1.0 / static_cast<double>(impurity.size());
    out[i] = static_cast<std::size_t>(std::llround(r * g));
  }
  return out;
}

ResampleResult adasyn(const LabeledDataset& ds, std::size_t k, double beta, std::uint64_t seed,
                      const LambdaSource& lambda) {
  require(k >= 1, ErrorKind::InvalidArgument, "adasyn: k must be >= 1");
  require(beta >= 0.0 && std::isfinite(beta), ErrorKind::InvalidArgument,
          "adasyn: beta must be non-negative");
  require_no_empty_class(ds, "adasyn");
  const auto counts = ds.class_counts();
  const std::size_t majority = *std::ranges::max_element(counts);
  Rng rng(seed);
  const LambdaSource draw_lambda = lambda ? lambda : uniform_lambda(rng);
  std::map<std::string, std::string> params{
      {"k", std::to_string(k)}, {"beta", std::to_string(beta)}, {"seed", std::to_string(seed)}};

  const NeighborIndex global(ds.features());
  const std::size_t k_all = std::min(k, ds.n() - 1);
  SyntheticBuilder builder(ds);
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] >= majority) continue;
    require(counts[c] >= 2, ErrorKind::InvalidArgument,
            "adasyn: class '" + ds.class_names()[c] + "' has a single sample");
    const auto members = ds.indices_of(static_cast<ClassId>(c));
    std::vector<double> impurity;
    impurity.reserve(members.size());
    for (std::size_t i : members) {
      std::size_t foreign = 0;
      for (const Neighbor& nb : global.query_row(i, k_all, true)) {
        if (ds.label(nb.index) != static_cast<ClassId>(c)) ++foreign;
      }
      impurity.push_back(static_cast<double>(foreign) / static_cast<double>(k_all));
    }
    const double g = beta * static_cast<double>(majority - counts[c]);
    const auto allocation = adasyn_allocation(impurity, g);

    const std::size_t k_eff = std::min(k, members.size() - 1);
    if (k_eff < k) note_clamp(params, ds, c, k_eff);
    const auto neighbors = within_class_neighbors(ds, members, k_eff);
    std::uniform_int_distribution<std::size_t> pick_neighbor(0, k_eff - 1);
    for (std::size_t m = 0; m < members.size(); ++m) {
      for (std::size_t t = 0; t < allocation[m]; ++t) {
        const std::size_t partner = neighbors[m][pick_neighbor(rng)];
        builder.emit(members[m], partner, draw_lambda());
      }
    }
  }
  return {all_indices(ds.n()), std::move(builder.out), "adasyn", std::move(params)};
}

}  // namespace filterloss
