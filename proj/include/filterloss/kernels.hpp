#pragma once

// Data-parallel inner loops shared by the neighbor search, the similarity
// statistics and the MLP. Each kernel has a scalar reference implementation
// and optional SIMD variants; the active variant is picked once at startup
// from the CPU features (override with FILTERLOSS_KERNELS=scalar|avx2|neon)
// and can be switched at runtime for equivalence testing.
//
// The scalar kernels accumulate strictly left to right, so results are
// bit-identical to a naive loop. SIMD variants accumulate per lane and agree
// with the reference to rounding only.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace filterloss::kernels {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
  Backend backend;
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
// nullptr when the variant was not compiled in or the CPU lacks it.
const KernelTable* avx2_table() noexcept;
const KernelTable* neon_table() noexcept;

bool backend_available(Backend backend) noexcept;
std::vector<Backend> available_backends();
std::string_view backend_name(Backend backend) noexcept;

const KernelTable& active() noexcept;
Backend active_backend() noexcept;
// Throws Error(InvalidArgument) when the backend is unavailable.
void set_backend(Backend backend);

/// Restores the previously active backend on destruction.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend);
  ~ScopedBackend();
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace filterloss::kernels
