#include "filterloss/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>

#include "filterloss/error.hpp"
#include "filterloss/random.hpp"

namespace filterloss {

LabeledDataset::LabeledDataset(Matrix features, std::vector<ClassId> labels,
                               std::vector<std::string> class_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      class_names_(std::move(class_names)) {
  require(features_.rows() == labels_.size(), ErrorKind::ShapeMismatch,
          "dataset has " + std::to_string(features_.rows()) + " feature rows but " +
              std::to_string(labels_.size()) + " labels");
  require(features_.all_finite(), ErrorKind::NonFinite, "dataset features contain NaN/Inf");
  const auto c = static_cast<ClassId>(class_names_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    require(labels_[i] >= 0 && labels_[i] < c, ErrorKind::InvalidArgument,
            "label " + std::to_string(labels_[i]) + " of row " + std::to_string(i) +
                " outside [0, " + std::to_string(c) + ")");
  }
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (ClassId y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::vector<std::size_t> LabeledDataset::indices_of(ClassId c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == c) out.push_back(i);
  }
  return out;
}

std::optional<ClassId> LabeledDataset::find_class(std::string_view name) const {
  for (std::size_t c = 0; c < class_names_.size(); ++c) {
    if (class_names_[c] == name) return static_cast<ClassId>(c);
  }
  return std::nullopt;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  std::vector<ClassId> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    require(i < n(), ErrorKind::InvalidArgument, "subset index " + std::to_string(i) +
                                                     " out of range");
    labels.push_back(labels_[i]);
  }
  return LabeledDataset(features_.gather_rows(indices), std::move(labels), class_names_);
}

LabeledDataset LabeledDataset::with_rows_appended(const Matrix& features,
                                                  std::span<const ClassId> labels) const {
  require(features.rows() == labels.size(), ErrorKind::ShapeMismatch,
          "appended rows and labels differ in length");
  Matrix merged = features_;
  merged.append_rows(features);
  std::vector<ClassId> merged_labels = labels_;
  merged_labels.insert(merged_labels.end(), labels.begin(), labels.end());
  return LabeledDataset(std::move(merged), std::move(merged_labels), class_names_);
}

LabeledDataset LabeledDataset::with_labels(std::vector<ClassId> labels) const {
  return LabeledDataset(features_, std::move(labels), class_names_);
}

// ---- CSV -------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::string row_tag(std::size_t data_row) {
  return "data row " + std::to_string(data_row) + " (line " + std::to_string(data_row + 1) + ")";
}

}  // namespace

LabeledDataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    require(std::filesystem::exists(path), ErrorKind::MissingFile,
            "no such file: " + path.string());
    fail(ErrorKind::Io, "cannot open " + path.string());
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      lines.push_back(trim(rest.substr(0, nl)));
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
  }
  require(!lines.empty(), ErrorKind::EmptyFile, path.string() + " is empty");

  const auto header = split_fields(lines.front());
  require(header.size() >= 2 && trim(header.back()) == "label", ErrorKind::InvalidArgument,
          path.string() + ": header must be f0,...,f{d-1},label");
  const std::size_t d = header.size() - 1;
  require(lines.size() >= 2, ErrorKind::EmptyFile, path.string() + " has no data rows");

  const std::size_t n = lines.size() - 1;
  Matrix features(n, d);
  std::vector<ClassId> labels;
  labels.reserve(n);
  std::vector<std::string> names;
  std::unordered_map<std::string, ClassId> ids;

  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t data_row = r + 1;
    const auto fields = split_fields(lines[data_row]);
    require(fields.size() == d + 1, ErrorKind::RaggedRow,
            path.string() + ": " + row_tag(data_row) + " has " + std::to_string(fields.size()) +
                " fields, expected " + std::to_string(d + 1));
    for (std::size_t j = 0; j < d; ++j) {
      const std::string_view token = trim(fields[j]);
      double value = 0.0;
      const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      require(ec == std::errc() && end == token.data() + token.size() && !token.empty(),
              ErrorKind::NonNumeric,
              path.string() + ": " + row_tag(data_row) + " field f" + std::to_string(j) +
                  " is not a number: '" + std::string(token) + "'");
      require(std::isfinite(value), ErrorKind::NonFinite,
              path.string() + ": " + row_tag(data_row) + " field f" + std::to_string(j) +
                  " is not finite");
      features(r, j) = value;
    }
    std::string token(trim(fields[d]));
    auto [it, inserted] = ids.try_emplace(token, static_cast<ClassId>(names.size()));
    if (inserted) names.push_back(token);
    labels.push_back(it->second);
  }
  return LabeledDataset(std::move(features), std::move(labels), std::move(names));
}

void save_csv(const LabeledDataset& ds, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t j = 0; j < ds.d(); ++j) {
    out += 'f';
    out += std::to_string(j);
    out += ',';
  }
  out += "label\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (double v : ds.row(i)) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
      out.append(buf, res.ptr);
      out += ',';
    }
    out += ds.class_names()[static_cast<std::size_t>(ds.label(i))];
    out += '\n';
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(file), ErrorKind::Io, "cannot write " + path.string());
  file << out;
  file.flush();
  require(static_cast<bool>(file), ErrorKind::Io, "write failed for " + path.string());
}

// ---- synthetic data --------------------------------------------------------

std::size_t SyntheticSpec::total() const noexcept {
  return std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0});
}

void SyntheticSpec::validate() const {
  require(!class_counts.empty(), ErrorKind::InvalidArgument, "synthetic spec needs >= 1 class");
  require(std::ranges::all_of(class_counts, [](std::size_t c) { return c >= 1; }),
          ErrorKind::InvalidArgument, "every class count must be >= 1");
  require(dim >= 1, ErrorKind::InvalidArgument, "synthetic dim must be >= 1");
  require(cluster_spread > 0.0 && std::isfinite(cluster_spread), ErrorKind::InvalidArgument,
          "cluster_spread must be positive");
  require(noise_floor >= 0.0 && std::isfinite(noise_floor), ErrorKind::InvalidArgument,
          "noise_floor must be non-negative");
  require(label_noise_frac >= 0.0 && label_noise_frac <= 1.0, ErrorKind::InvalidArgument,
          "label_noise_frac must lie in [0, 1]");
}

Matrix default_centroids(std::size_t n_classes, std::size_t dim) {
  Rng rng(kCentroidSeed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix centroids(n_classes, dim);
  for (double& v : centroids.values()) v = kCentroidScale * normal(rng);
  return centroids;
}

SyntheticDataset synth_generate(const SyntheticSpec& spec,
                                const std::optional<Matrix>& shared_centroids) {
  spec.validate();
  const std::size_t c_count = spec.n_classes();
  Matrix centroids;
  if (shared_centroids) {
    require(shared_centroids->rows() == c_count && shared_centroids->cols() == spec.dim,
            ErrorKind::ShapeMismatch,
            "shared centroids are " + std::to_string(shared_centroids->rows()) + "x" +
                std::to_string(shared_centroids->cols()) + ", spec needs " +
                std::to_string(c_count) + "x" + std::to_string(spec.dim));
    centroids = *shared_centroids;
  } else {
    centroids = default_centroids(c_count, spec.dim);
  }

  Rng rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix features(spec.total(), spec.dim);
  std::vector<ClassId> labels;
  labels.reserve(spec.total());
  std::size_t r = 0;
  for (std::size_t c = 0; c < c_count; ++c) {
    for (std::size_t k = 0; k < spec.class_counts[c]; ++k, ++r) {
      for (std::size_t j = 0; j < spec.dim; ++j) {
        const double signal = spec.cluster_spread * normal(rng);
        const double noise = spec.noise_floor * normal(rng);
        features(r, j) = centroids(c, j) + signal + noise;
      }
      labels.push_back(static_cast<ClassId>(c));
    }
  }
  std::vector<std::string> names;
  for (std::size_t c = 0; c < c_count; ++c) names.push_back("c" + std::to_string(c));

  LabeledDataset ds(std::move(features), std::move(labels), std::move(names));
  if (spec.label_noise_frac > 0.0) {
    ds = flip_labels(ds, spec.label_noise_frac, derive_seed(spec.seed, "label-noise"));
  }
  return {std::move(ds), std::move(centroids)};
}

LabeledDataset flip_labels(const LabeledDataset& ds, double frac, std::uint64_t seed) {
  require(frac >= 0.0 && frac <= 1.0, ErrorKind::InvalidArgument,
          "label noise fraction must lie in [0, 1]");
  const auto flips = static_cast<std::size_t>(std::llround(frac * static_cast<double>(ds.n())));
  if (flips == 0) return ds;
  require(ds.num_classes() >= 2, ErrorKind::InvalidArgument,
          "label noise needs at least two classes");

  Rng rng(seed);
  std::vector<std::size_t> order(ds.n());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<ClassId> labels(ds.labels().begin(), ds.labels().end());
  std::uniform_int_distribution<ClassId> other(0, static_cast<ClassId>(ds.num_classes()) - 2);
  for (std::size_t k = 0; k < flips; ++k) {
    const std::size_t i = order[k];
    const ClassId draw = other(rng);
    labels[i] = draw >= labels[i] ? draw + 1 : draw;
  }
  return ds.with_labels(std::move(labels));
}

// ---- splitting and preprocessing -------------------------------------------

SplitIndices stratified_split_indices(const LabeledDataset& ds, double test_frac,
                                      std::uint64_t seed) {
  require(test_frac > 0.0 && test_frac < 1.0, ErrorKind::InvalidArgument,
          "test_frac must lie in (0, 1)");
  Rng rng(seed);
  SplitIndices out;
  for (std::size_t c = 0; c < ds.num_classes(); ++c) {
    std::vector<std::size_t> members = ds.indices_of(static_cast<ClassId>(c));
    if (members.empty()) continue;
    require(members.size() >= 2, ErrorKind::InvalidArgument,
            "class '" + ds.class_names()[c] + "' has fewer than 2 samples; cannot stratify");
    const auto count = static_cast<long long>(members.size());
    long long n_test = std::llround(test_frac * static_cast<double>(count));
    n_test = std::clamp(n_test, 1LL, count - 1);
    std::shuffle(members.begin(), members.end(), rng);
    out.test.insert(out.test.end(), members.begin(), members.begin() + n_test);
    out.train.insert(out.train.end(), members.begin() + n_test, members.end());
  }
  std::ranges::sort(out.train);
  std::ranges::sort(out.test);
  return out;
}

Split stratified_split(const LabeledDataset& ds, double test_frac, std::uint64_t seed) {
  const SplitIndices idx = stratified_split_indices(ds, test_frac, seed);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

Normalizer fit_normalizer(const LabeledDataset& ds) {
  require(ds.n() >= 1, ErrorKind::InvalidArgument, "cannot fit a normalizer on zero rows");
  const std::size_t n = ds.n();
  const std::size_t d = ds.d();
  const auto nd = static_cast<double>(n);
  Normalizer norm{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += ds.features()(i, j);
    double mean = sum / nd;
    // Second pass corrects the rounding of the first; a constant column then
    // gets its exact value as mean.
    double correction = 0.0;
    for (std::size_t i = 0; i < n; ++i) correction += ds.features()(i, j) - mean;
    mean += correction / nd;
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = ds.features()(i, j) - mean;
      sq += diff * diff;
    }
    norm.mean[j] = mean;
    norm.stddev[j] = std::max(std::sqrt(sq / nd), kStdFloor);
  }
  return norm;
}

LabeledDataset apply_normalizer(const Normalizer& norm, const LabeledDataset& ds) {
  require(norm.mean.size() == ds.d() && norm.stddev.size() == ds.d(), ErrorKind::ShapeMismatch,
          "normalizer width " + std::to_string(norm.mean.size()) + " vs dataset width " +
              std::to_string(ds.d()));
  Matrix out = ds.features();
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      out(i, j) = (out(i, j) - norm.mean[j]) / norm.stddev[j];
    }
  }
  return LabeledDataset(std::move(out), std::vector<ClassId>(ds.labels().begin(), ds.labels().end()),
                        ds.class_names());
}

std::vector<ClassShare> class_distribution(const LabeledDataset& ds) {
  require(ds.n() >= 1, ErrorKind::InvalidArgument, "class distribution of an empty dataset");
  const auto counts = ds.class_counts();
  std::vector<ClassShare> out;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    out.push_back({ds.class_names()[c], counts[c],
                   static_cast<double>(counts[c]) / static_cast<double>(ds.n())});
  }
  return out;
}

double imbalance_ratio(const LabeledDataset& ds) {
  std::size_t lo = 0;
  std::size_t hi = 0;
  for (std::size_t count : ds.class_counts()) {
    if (count == 0) continue;
    hi = std::max(hi, count);
    lo = lo == 0 ? count : std::min(lo, count);
  }
  require(lo > 0, ErrorKind::InvalidArgument, "imbalance ratio of an empty dataset");
  return static_cast<double>(hi) / static_cast<double>(lo);
}

}  // namespace filterloss
