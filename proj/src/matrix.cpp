#include "filterloss/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "filterloss/error.hpp"

namespace filterloss {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  require(values_.size() == rows * cols, ErrorKind::ShapeMismatch,
          "matrix of " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
              std::to_string(values_.size()) + " values");
}

Matrix Matrix::gather_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < rows_, ErrorKind::InvalidArgument,
            "row index " + std::to_string(indices[i]) + " out of range");
    std::ranges::copy(row(indices[i]), out.row(i).begin());
  }
  return out;
}

void Matrix::append_rows(const Matrix& other) {
  if (other.rows_ == 0) return;
  if (rows_ == 0 && cols_ == 0) cols_ = other.cols_;
  require(other.cols_ == cols_, ErrorKind::ShapeMismatch,
          "cannot append rows of width " + std::to_string(other.cols_) + " to width " +
              std::to_string(cols_));
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
  rows_ += other.rows_;
}

bool Matrix::all_finite() const noexcept {
  return std::ranges::all_of(values_, [](double v) { return std::isfinite(v); });
}

}  // namespace filterloss
