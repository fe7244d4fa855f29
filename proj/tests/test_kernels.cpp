#include <random>
#include <vector>

#include "doctest.h"
#include "filterloss/error.hpp"
#include "filterloss/kernels.hpp"
#include "support/support.hpp"

namespace k = filterloss::kernels;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double scale = 10.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("scalar backend is always available and matches a naive loop bit for bit") {
  CHECK(k::backend_available(k::Backend::Scalar));
  std::mt19937_64 rng(7);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 17u, 64u, 129u}) {
    const auto a = random_vec(rng, n);
    const auto b = random_vec(rng, n);
    const auto& t = k::scalar_table();
    CHECK(t.dot(a.data(), b.data(), n) == naive_dot(a, b));
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(t.squared_distance(a.data(), b.data(), n) == sq);
    std::vector<double> y = b;
    t.axpy(0.5, a.data(), y.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y[i] == b[i] + 0.5 * a[i]);
  }
}

TEST_CASE("every compiled SIMD backend agrees with the scalar reference") {
  std::mt19937_64 rng(11);
  const auto& ref = k::scalar_table();
  for (k::Backend backend : k::available_backends()) {
    if (backend == k::Backend::Scalar) continue;
    const k::KernelTable* t =
        backend == k::Backend::Avx2 ? k::avx2_table() : k::neon_table();
    REQUIRE(t != nullptr);
    CAPTURE(t->name);
    for (int trial = 0; trial < 300; ++trial) {
      const std::size_t n = static_cast<std::size_t>(trial % 70);
      const auto a = random_vec(rng, n);
      const auto b = random_vec(rng, n);
      // reordered summation: compare against the magnitude of the terms
      double mag = 0.0, mag_sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        mag += std::abs(a[i] * b[i]);
        mag_sq += (a[i] - b[i]) * (a[i] - b[i]);
      }
      CHECK(std::abs(t->dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <=
            1e-12 * (mag + 1e-300));
      CHECK(testing::rel_err(t->squared_distance(a.data(), b.data(), n),
                             ref.squared_distance(a.data(), b.data(), n)) <= 1e-12);
      std::vector<double> y1 = b, y2 = b;
      t->axpy(-1.25, a.data(), y1.data(), n);
      ref.axpy(-1.25, a.data(), y2.data(), n);
      CHECK(y1 == y2);  // elementwise, no reassociation
    }
  }
}

TEST_CASE("squared distance of a vector with itself is exactly zero on every backend") {
  std::mt19937_64 rng(3);
  for (k::Backend backend : k::available_backends()) {
    k::ScopedBackend scope(backend);
    const auto a = random_vec(rng, 37);
    CHECK(k::squared_distance(a, a) == 0.0);
  }
}

TEST_CASE("backend switching") {
  const k::Backend before = k::active_backend();
  {
    k::ScopedBackend scope(k::Backend::Scalar);
    CHECK(k::active_backend() == k::Backend::Scalar);
    CHECK(k::active().name == k::backend_name(k::Backend::Scalar));
  }
  CHECK(k::active_backend() == before);
  for (k::Backend b : {k::Backend::Avx2, k::Backend::Neon}) {
    if (!k::backend_available(b)) CHECK_THROWS_AS(k::set_backend(b), filterloss::Error);
  }
}
