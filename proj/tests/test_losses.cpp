#include <cmath>
#include <random>

#include "doctest.h"
#include "filterloss/error.hpp"
#include "filterloss/losses.hpp"
#include "oracles/oracles.hpp"
#include "support/support.hpp"

using namespace filterloss;

namespace {

constexpr LossFamily kFamilies[] = {LossFamily::CrossEntropy, LossFamily::LabelSmooth, LossFamily::Focal,
                                    LossFamily::FocalLogits, LossFamily::LabelSmoothFocal};

LossSpec spec_of(LossFamily f, double gamma = 2.0, double eps = 0.1) {
  LossSpec s;
  s.family = f;
  s.gamma = gamma;
  s.epsilon = eps;
  return s;
}

Matrix random_logits(std::mt19937_64& rng, std::size_t n, std::size_t c, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix z(n, c);
  for (double& v : z.values()) v = u(rng);
  return z;
}

std::vector<ClassId> random_labels(std::mt19937_64& rng, std::size_t n, std::size_t c) {
  std::vector<ClassId> y(n);
  for (auto& v : y) v = static_cast<ClassId>(rng() % c);
  return y;
}

double one_loss(const LossSpec& spec, const std::vector<double>& z, ClassId y) {
  Matrix m(1, z.size(), z);
  const std::vector<ClassId> labels{y};
  return per_sample_loss(spec, m, labels).values[0];
}

// direct formulas from the definitions
double formula(LossFamily f, const std::vector<double>& z, int y, double g, double eps) {
  const auto p = oracle::softmax(z);
  const double c = static_cast<double>(z.size());
  double v = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double onehot = static_cast<int>(k) == y ? 1.0 : 0.0;
    const bool smooth = f == LossFamily::LabelSmooth || f == LossFamily::LabelSmoothFocal;
    const bool focal = f != LossFamily::CrossEntropy && f != LossFamily::LabelSmooth;
    const double q = smooth ? (1 - eps) * onehot + eps / c : onehot;
    v -= q * (focal ? std::pow(1 - p[k], g) : 1.0) * std::log(p[k]);
  }
  return v;
}

}  // namespace

TEST_CASE("closed-form loss values") {
  CHECK(one_loss(spec_of(LossFamily::CrossEntropy), {40.0, 0.0}, 0) < 1e-12);
  CHECK(one_loss(spec_of(LossFamily::CrossEntropy), {0.3, 0.3}, 1) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  // p_y = 0.9 with two classes: z = (log 9, 0)
  const double focal = one_loss(spec_of(LossFamily::Focal, 2.0), {std::log(9.0), 0.0}, 0);
  CHECK(focal == doctest::Approx(-0.01 * std::log(0.9)).epsilon(1e-12));
  CHECK(focal == doctest::Approx(1.0536e-3).epsilon(1e-4));
}

TEST_CASE("loss values match the textbook formulas") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 2 + rng() % 5;
    std::vector<double> z(c);
    for (double& v : z) v = std::uniform_real_distribution<double>(-4, 4)(rng);
    const int y = static_cast<int>(rng() % c);
    const double g = std::uniform_real_distribution<double>(0, 3)(rng);
    const double eps = std::uniform_real_distribution<double>(0, 0.5)(rng);
    for (LossFamily f : kFamilies) {
      CHECK(testing::rel_err(one_loss(spec_of(f, g, eps), z, y), formula(f, z, y, g, eps)) < 1e-12);
    }
  }
}

TEST_CASE("family lattice") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t c = 2 + rng() % 6;
    const Matrix z = random_logits(rng, 16, c, 6.0);
    const auto y = random_labels(rng, 16, c);
    const auto ce = per_sample_loss(spec_of(LossFamily::CrossEntropy), z, y).values;
    const auto f0 = per_sample_loss(spec_of(LossFamily::Focal, 0.0), z, y).values;
    const auto ls0 = per_sample_loss(spec_of(LossFamily::LabelSmooth, 2.0, 0.0), z, y).values;
    const auto focal = per_sample_loss(spec_of(LossFamily::Focal, 1.7), z, y).values;
    const auto lsf_e0 = per_sample_loss(spec_of(LossFamily::LabelSmoothFocal, 1.7, 0.0), z, y).values;
    const auto ls = per_sample_loss(spec_of(LossFamily::LabelSmooth, 2.0, 0.2), z, y).values;
    const auto lsf_g0 = per_sample_loss(spec_of(LossFamily::LabelSmoothFocal, 0.0, 0.2), z, y).values;
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(std::abs(f0[i] - ce[i]) <= 1e-12 * std::max(1.0, ce[i]));
      CHECK(std::abs(ls0[i] - ce[i]) <= 1e-12 * std::max(1.0, ce[i]));
      CHECK(std::abs(lsf_e0[i] - focal[i]) <= 1e-12 * std::max(1.0, focal[i]));
      CHECK(std::abs(lsf_g0[i] - ls[i]) <= 1e-12 * std::max(1.0, ls[i]));
    }
  }
}

TEST_CASE("focal_logits agrees with focal and survives extreme logits") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng() % 6;
    const Matrix z = random_logits(rng, 8, c, 20.0);
    const auto y = random_labels(rng, 8, c);
    const double g = std::uniform_real_distribution<double>(0, 4)(rng);
    const auto a = per_sample_loss(spec_of(LossFamily::Focal, g), z, y);
    const auto b = per_sample_loss(spec_of(LossFamily::FocalLogits, g), z, y);
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(a.values[i] - b.values[i]) <= 1e-8);
  }
  Matrix big(2, 3, std::vector<double>{1e4, -1e4, 0.0, -1e4, 1e4, 3.0});
  const std::vector<ClassId> y{1, 0};
  const auto r = per_sample_loss(spec_of(LossFamily::FocalLogits), big, y);
  CHECK(std::isfinite(r.values[0]));
  CHECK(std::isfinite(r.values[1]));
  CHECK(r.values[0] > 1e3);
  CHECK(r.grad_logits.all_finite());
}

TEST_CASE("analytic logit gradients match central differences") {
  std::mt19937_64 rng(4);
  for (LossFamily f : kFamilies) {
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t c = 2 + rng() % 6;
      std::vector<double> z(c);
      for (double& v : z) v = std::uniform_real_distribution<double>(-3, 3)(rng);
      const auto y = static_cast<ClassId>(rng() % c);
      const LossSpec spec = spec_of(f, std::uniform_real_distribution<double>(0, 3)(rng),
                                    std::uniform_real_distribution<double>(0, 0.4)(rng));
      Matrix m(1, c, z);
      const std::vector<ClassId> labels{y};
      const auto result = per_sample_loss(spec, m, labels);
      const auto analytic = result.grad_logits.row(0);
      std::vector<double> numeric(c);
      for (std::size_t k = 0; k < c; ++k) {
        numeric[k] = oracle::central_diff([&](const std::vector<double>& v) { return one_loss(spec, v, y); }, z, k);
      }
      double diff = 0.0, norm = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        diff += (analytic[k] - numeric[k]) * (analytic[k] - numeric[k]);
        norm = std::max({norm, analytic[k] * analytic[k], numeric[k] * numeric[k]});
      }
      CAPTURE(loss_family_name(f));
      CHECK(std::sqrt(diff) / std::max(std::sqrt(norm), 1e-8) < 1e-4);
    }
  }
}

TEST_CASE("shift invariance") {
  std::mt19937_64 rng(5);
  for (LossFamily f : kFamilies) {
    const Matrix z = random_logits(rng, 20, 4, 5.0);
    const auto y = random_labels(rng, 20, 4);
    Matrix shifted = z;
    for (std::size_t i = 0; i < 20; ++i) {
      const double s = std::uniform_real_distribution<double>(-50, 50)(rng);
      for (double& v : shifted.row(i)) v += s;
    }
    const auto a = per_sample_loss(spec_of(f), z, y).values;
    const auto b = per_sample_loss(spec_of(f), shifted, y).values;
    for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-9);
  }
}

TEST_CASE("weighted reduction") {
  PerSampleLoss two{{2.0, 4.0}, Matrix(2, 1, 1.0)};
  CHECK(reduce_weighted(two, std::vector<double>{1, 1}).value == 3.0);
  CHECK(reduce_weighted(two, std::vector<double>{0, 1}).value == 2.0);
  PerSampleLoss four{{1, 2, 3, 4}, Matrix(4, 1, 1.0)};
  CHECK(reduce_weighted(four, std::vector<double>{1, 1, 0, 0}).value == 0.75);
  CHECK(reduce_weighted(four, std::vector<double>{1, 1, 0, 0}, WeightNormalization::WeightSum).value == 1.5);
  CHECK_THROWS_AS(reduce_weighted(four, std::vector<double>{1, 1}), Error);
}

TEST_CASE("unit weights reproduce the plain mean; binary weights scale the subset mean") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 40, c = 2 + rng() % 5;
    const Matrix z = random_logits(rng, n, c, 4.0);
    const auto y = random_labels(rng, n, c);
    const auto per = per_sample_loss(spec_of(LossFamily::FocalLogits), z, y);
    const auto w = reduce_weighted(per, std::vector<double>(n, 1.0));
    const auto m = reduce_mean(per);
    CHECK(w.value == m.value);
    CHECK(w.grad_logits == m.grad_logits);

    std::vector<double> omega(n);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < n; ++i) {
      omega[i] = rng() % 2 ? 1.0 : 0.0;
      if (omega[i] == 1.0) keep.push_back(i);
    }
    if (keep.empty()) continue;
    std::vector<ClassId> yk;
    for (std::size_t i : keep) yk.push_back(y[i]);
    const auto sub = reduce_mean(per_sample_loss(spec_of(LossFamily::FocalLogits), z.gather_rows(keep), yk));
    const auto full = reduce_weighted(per, omega);
    const double ratio = static_cast<double>(keep.size()) / static_cast<double>(n);
    CHECK(testing::rel_err(full.value, ratio * sub.value) < 1e-12);
    for (std::size_t k = 0; k < keep.size(); ++k) {
      for (std::size_t j = 0; j < c; ++j) {
        CHECK(std::abs(full.grad_logits(keep[k], j) - ratio * sub.grad_logits(k, j)) <=
              1e-10 * std::abs(ratio * sub.grad_logits(k, j)) + 1e-300);
      }
    }
  }
}

TEST_CASE("invalid inputs") {
  Matrix z(1, 3, std::vector<double>{0, std::nan(""), 1});
  CHECK_THROWS_AS(per_sample_loss(spec_of(LossFamily::CrossEntropy), z, std::vector<ClassId>{0}), Error);
  Matrix ok(1, 3);
  CHECK_THROWS_AS(per_sample_loss(spec_of(LossFamily::CrossEntropy), ok, std::vector<ClassId>{3}), Error);
  CHECK_THROWS_AS(per_sample_loss(spec_of(LossFamily::Focal, -1.0), ok, std::vector<ClassId>{0}), Error);
  CHECK_THROWS_AS(per_sample_loss(spec_of(LossFamily::LabelSmooth, 2.0, 1.0), ok, std::vector<ClassId>{0}), Error);
  CHECK(parse_loss_family("focal_logits") == LossFamily::FocalLogits);
  CHECK_THROWS_AS(parse_loss_family("hinge"), Error);
}
