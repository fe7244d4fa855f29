#include "filterloss/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "filterloss/error.hpp"
#include "filterloss/kernels.hpp"

namespace filterloss {

namespace {

bool closer(const Neighbor& a, const Neighbor& b) noexcept {
  if (a.squared_distance != b.squared_distance) return a.squared_distance < b.squared_distance;
  return a.index < b.index;
}

}  // namespace

NeighborIndex::NeighborIndex(Matrix reference) : reference_(std::move(reference)) {
  require(reference_.rows() >= 1, ErrorKind::InvalidArgument,
          "neighbor index needs at least one reference row");
}

std::vector<Neighbor> NeighborIndex::query(std::span<const double> point, std::size_t k,
                                           std::optional<std::size_t> exclude) const {
  require(point.size() == dim(), ErrorKind::ShapeMismatch,
          "query of width " + std::to_string(point.size()) + " against index of width " +
              std::to_string(dim()));
  require(std::ranges::all_of(point, [](double v) { return std::isfinite(v); }),
          ErrorKind::NonFinite, "k-NN query contains NaN/Inf");
  const std::size_t candidates = size() - (exclude && *exclude < size() ? 1 : 0);
  require(k >= 1 && k <= candidates, ErrorKind::InvalidArgument,
          "k=" + std::to_string(k) + " but only " + std::to_string(candidates) +
              " candidates available");

  std::vector<Neighbor> all;
  all.reserve(candidates);
  for (std::size_t i = 0; i < size(); ++i) {
    if (exclude && *exclude == i) continue;
    all.push_back({i, kernels::squared_distance(point, reference_.row(i))});
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  return all;
}

std::vector<Neighbor> NeighborIndex::query_row(std::size_t row, std::size_t k,
                                               bool exclude_self) const {
  require(row < size(), ErrorKind::InvalidArgument, "query row out of range");
  return query(reference_.row(row), k, exclude_self ? std::optional(row) : std::nullopt);
}

namespace {

std::vector<std::size_t> indices_only(const std::vector<Neighbor>& hits) {
  std::vector<std::size_t> out;
  out.reserve(hits.size());
  for (const Neighbor& h : hits) out.push_back(h.index);
  return out;
}

}  // namespace

std::vector<std::size_t> knn_indices(const NeighborIndex& index, std::span<const double> point,
                                     std::size_t k, std::optional<std::size_t> exclude) {
  return indices_only(index.query(point, k, exclude));
}

std::vector<std::size_t> knn_indices(const NeighborIndex& index, std::size_t row, std::size_t k,
                                     bool exclude_self) {
  return indices_only(index.query_row(row, k, exclude_self));
}

}  // namespace filterloss
