#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "filterloss/dataset.hpp"
#include "filterloss/matrix.hpp"

namespace testing {

using filterloss::ClassId;
using filterloss::LabeledDataset;
using filterloss::Matrix;

inline double rel_err(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

// max |a - b| / max(|a|, |b|, floor) over all entries
inline double max_rel_err(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

inline std::vector<std::string> class_names(std::size_t c) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < c; ++i) out.push_back("c" + std::to_string(i));
  return out;
}

// Uniform features in [-scale, scale]; labels cycle first so every class is present.
inline LabeledDataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d,
                                     std::size_t c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix x(n, d);
  for (double& v : x.values()) v = u(rng);
  std::vector<ClassId> y(n);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(c) - 1);
  for (std::size_t i = 0; i < n; ++i) y[i] = i < c ? static_cast<ClassId>(i) : pick(rng);
  std::shuffle(y.begin(), y.end(), rng);
  return LabeledDataset(std::move(x), std::move(y), class_names(c));
}

// Features on a coarse integer grid, so exact distance ties are common.
inline LabeledDataset grid_dataset(std::mt19937_64& rng, std::size_t n, std::size_t d,
                                   std::size_t c, int levels = 4) {
  std::uniform_int_distribution<int> u(0, levels - 1);
  Matrix x(n, d);
  for (double& v : x.values()) v = u(rng);
  std::vector<ClassId> y(n);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(c) - 1);
  for (std::size_t i = 0; i < n; ++i) y[i] = i < c ? static_cast<ClassId>(i) : pick(rng);
  std::shuffle(y.begin(), y.end(), rng);
  return LabeledDataset(std::move(x), std::move(y), class_names(c));
}

inline LabeledDataset make_dataset(std::vector<std::vector<double>> rows, std::vector<ClassId> labels,
                                   std::size_t c = 0) {
  const std::size_t d = rows.empty() ? 0 : rows.front().size();
  Matrix x(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) x(i, j) = rows[i][j];
  }
  if (c == 0) c = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  return LabeledDataset(std::move(x), std::move(labels), class_names(c));
}

inline std::vector<std::vector<double>> rows_of(const LabeledDataset& ds) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < ds.n(); ++i) out.emplace_back(ds.row(i).begin(), ds.row(i).end());
  return out;
}

inline std::vector<int> labels_of(const LabeledDataset& ds) {
  return {ds.labels().begin(), ds.labels().end()};
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("filterloss-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
