#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "filterloss/matrix.hpp"

namespace filterloss {

struct Neighbor {
  std::size_t index = 0;
  double squared_distance = 0.0;
};

/// Exact brute-force k-NN over a fixed reference matrix, Euclidean metric.
/// Results are ordered by ascending distance, ties by ascending reference
/// index, so queries are reproducible across platforms.
class NeighborIndex {
 public:
  explicit NeighborIndex(Matrix reference);

  std::size_t size() const noexcept { return reference_.rows(); }
  std::size_t dim() const noexcept { return reference_.cols(); }
  const Matrix& reference() const noexcept { return reference_; }

  /// `exclude` removes one reference index from the candidates.
  /// Throws InvalidArgument when k is 0 or exceeds the candidate count.
  std::vector<Neighbor> query(std::span<const double> point, std::size_t k,
                              std::optional<std::size_t> exclude = std::nullopt) const;

  /// k-NN of reference row `row`, optionally leaving the row itself out.
  std::vector<Neighbor> query_row(std::size_t row, std::size_t k, bool exclude_self) const;

 private:
  Matrix reference_;
};

std::vector<std::size_t> knn_indices(const NeighborIndex& index, std::span<const double> point,
                                     std::size_t k,
                                     std::optional<std::size_t> exclude = std::nullopt);
std::vector<std::size_t> knn_indices(const NeighborIndex& index, std::size_t row, std::size_t k,
                                     bool exclude_self);

}  // namespace filterloss
