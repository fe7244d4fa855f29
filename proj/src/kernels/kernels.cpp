#include "filterloss/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#include "filterloss/error.hpp"
#include "kernels_impl.hpp"

namespace filterloss::kernels {

namespace {

constexpr KernelTable kScalar{Backend::Scalar, "scalar", detail::dot_scalar,
                              detail::squared_distance_scalar, detail::axpy_scalar};

#if defined(FILTERLOSS_HAVE_AVX2)
constexpr KernelTable kAvx2{Backend::Avx2, "avx2", detail::dot_avx2,
                            detail::squared_distance_avx2, detail::axpy_avx2};
#endif

#if defined(FILTERLOSS_HAVE_NEON)
constexpr KernelTable kNeon{Backend::Neon, "neon", detail::dot_neon,
                            detail::squared_distance_neon, detail::axpy_neon};
#endif

const KernelTable* table_for(Backend backend) noexcept {
  switch (backend) {
    case Backend::Scalar: return &kScalar;
    case Backend::Avx2: return avx2_table();
    case Backend::Neon: return neon_table();
  }
  return nullptr;
}

const KernelTable* initial_table() noexcept {
  if (const char* forced = std::getenv("FILTERLOSS_KERNELS")) {
    const std::string_view name(forced);
    for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
      if (name == backend_name(b)) {
        if (const KernelTable* t = table_for(b)) return t;
      }
    }
  }
  if (const KernelTable* t = avx2_table()) return t;
  if (const KernelTable* t = neon_table()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& active_slot() noexcept {
  static std::atomic<const KernelTable*> slot{initial_table()};
  return slot;
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable* avx2_table() noexcept {
#if defined(FILTERLOSS_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_table() noexcept {
#if defined(FILTERLOSS_HAVE_NEON)
  return &kNeon;
#else
  return nullptr;
#endif
}

bool backend_available(Backend backend) noexcept { return table_for(backend) != nullptr; }

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
    if (backend_available(b)) out.push_back(b);
  }
  return out;
}

std::string_view backend_name(Backend backend) noexcept {
  switch (backend) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
    case Backend::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable& active() noexcept {
  return *active_slot().load(std::memory_order_relaxed);
}

Backend active_backend() noexcept { return active().backend; }

void set_backend(Backend backend) {
  const KernelTable* t = table_for(backend);
  require(t != nullptr, ErrorKind::InvalidArgument,
          "kernel backend '" + std::string(backend_name(backend)) + "' is not available");
  active_slot().store(t, std::memory_order_relaxed);
}

ScopedBackend::ScopedBackend(Backend backend) : previous_(active_backend()) {
  set_backend(backend);
}

ScopedBackend::~ScopedBackend() { set_backend(previous_); }

}  // namespace filterloss::kernels
