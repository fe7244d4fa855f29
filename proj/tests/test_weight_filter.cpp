#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "filterloss/error.hpp"
#include "filterloss/resampling.hpp"
#include "filterloss/weight_filter.hpp"
#include "support/support.hpp"

using namespace filterloss;

TEST_CASE("worked five-sample example") {
  const std::vector<std::vector<std::size_t>> keeps{{0, 1, 2}, {0, 2, 4}};
  const auto counts = count_memberships(5, keeps);
  CHECK(counts == std::vector<std::size_t>{2, 1, 2, 0, 1});
  const WeightTable table({0.0, 0.5, 1.0});
  CHECK(weights_from_counts(counts, table).omegas == std::vector<double>{1.0, 0.5, 1.0, 0.0, 0.5});
}

TEST_CASE("default ramp") {
  const auto t = default_weight_table(2, 0.1);
  REQUIRE(t.size() == 3);
  CHECK(t[0] == 0.1);
  CHECK(t[1] == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(t[2] == 1.0);
  CHECK(std::ranges::equal(default_weight_table(2, 0.0).alphas(), std::vector<double>{0.0, 0.5, 1.0}));
  CHECK(std::ranges::equal(default_weight_table(1, 0.0).alphas(), std::vector<double>{0.0, 1.0}));
  CHECK_THROWS_AS(default_weight_table(2, 1.5), Error);
  CHECK_THROWS_AS(default_weight_table(2, -0.1), Error);
  CHECK_THROWS_AS(WeightTable({0.5, 0.2}), Error);
}

TEST_CASE("binary table turns one sampler into its keep indicator") {
  std::mt19937_64 rng(1);
  const auto ds = testing::random_dataset(rng, 40, 2, 3);
  const std::vector<UndersamplerSpec> one{{UndersamplerMethod::Enn, 3, 0}};
  const auto w = assign_weights(ds, one, WeightTable({0.0, 1.0}));
  const auto keep = enn(ds, 3).keep_indices;
  std::vector<std::size_t> ones;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w.omegas[i] == 1.0) ones.push_back(i);
    else CHECK(w.omegas[i] == 0.0);
  }
  CHECK(ones == keep);

  const std::vector<UndersamplerSpec> two{{UndersamplerMethod::Enn, 3, 0}, {UndersamplerMethod::Oss, 3, 4}};
  const auto flat = assign_weights(ds, two, WeightTable({1.0, 1.0, 1.0}));
  CHECK(std::ranges::all_of(flat.omegas, [](double v) { return v == 1.0; }));
}

TEST_CASE("table length and sampler failures are reported") {
  std::mt19937_64 rng(2);
  const auto ds = testing::random_dataset(rng, 10, 2, 2);
  const std::vector<UndersamplerSpec> two{{UndersamplerMethod::Enn, 3, 0}, {UndersamplerMethod::Tomek, 3, 0}};
  try {
    assign_weights(ds, two, WeightTable({0.0, 1.0}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("expected 3") != std::string::npos);
  }
  const std::vector<UndersamplerSpec> bad{{UndersamplerMethod::Enn, 20, 0}};
  try {
    assign_weights(ds, bad, WeightTable({0.0, 1.0}));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("sampler 'enn'") != std::string::npos);
  }
}

TEST_CASE("monotone in the set of samplers that keep a sample") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 20, k = 1 + rng() % 4;
    std::vector<std::vector<std::size_t>> keeps(k);
    std::vector<std::vector<bool>> member(k, std::vector<bool>(n));
    for (std::size_t s = 0; s < k; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        if (rng() % 2) {
          keeps[s].push_back(i);
          member[s][i] = true;
        }
      }
    }
    std::vector<double> alphas(k + 1);
    for (double& a : alphas) a = std::uniform_real_distribution<double>()(rng);
    std::ranges::sort(alphas);
    const auto w = weights_from_counts(count_memberships(n, keeps), WeightTable(alphas));
    for (std::size_t a = 0; a < n; ++a) {
      CHECK(std::ranges::find(alphas, w.omegas[a]) != alphas.end());
      for (std::size_t b = 0; b < n; ++b) {
        bool superset = true;
        for (std::size_t s = 0; s < k; ++s) superset = superset && (!member[s][b] || member[s][a]);
        if (superset) CHECK(w.omegas[a] >= w.omegas[b]);
      }
    }
  }
}

TEST_CASE("permuting rows permutes the weights") {
  std::mt19937_64 rng(4);
  const std::vector<UndersamplerSpec> samplers{{UndersamplerMethod::Enn, 3, 0},
                                               {UndersamplerMethod::Tomek, 3, 0}};
  for (int trial = 0; trial < 30; ++trial) {
    const auto ds = testing::random_dataset(rng, 35, 2, 3);
    std::vector<std::size_t> perm(ds.n());
    std::iota(perm.begin(), perm.end(), 0u);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto table = default_weight_table(2);
    const auto w = assign_weights(ds, samplers, table);
    const auto wp = assign_weights(ds.subset(perm), samplers, table);
    for (std::size_t j = 0; j < perm.size(); ++j) CHECK(wp.omegas[j] == w.omegas[perm[j]]);
  }
}

TEST_CASE("histogram bins sum to n and the weight CSV round-trips") {
  std::mt19937_64 rng(5);
  const auto ds = testing::random_dataset(rng, 50, 3, 3);
  const std::vector<UndersamplerSpec> one{{UndersamplerMethod::Enn, 3, 0}};
  const auto counts = keep_counts(ds, one);
  const auto bins = weight_histogram(counts, WeightTable({0.0, 1.0}));
  REQUIRE(bins.size() == 2);
  CHECK(bins[0].count + bins[1].count == 50);

  testing::TempDir dir("w");
  const auto w = weights_from_counts(counts, default_weight_table(1, 0.3));
  save_weights_csv(w, dir / "w.csv");
  CHECK(load_weights_csv(dir / "w.csv").omegas == w.omegas);
}
