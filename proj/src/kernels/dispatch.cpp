// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <string>

#include "codegraph/error.hpp"
#include "kernels/backends.hpp"

namespace codegraph::kernels {

namespace {

constexpr KernelTable kScalarTable{&scalar::squared_l2, &scalar::squared_l2_rows,
                                   &scalar::accumulate, &scalar::scale};
#if defined(CODEGRAPH_HAVE_AVX2)
constexpr KernelTable kAvx2Table{&avx2::squared_l2, &avx2::squared_l2_rows, &avx2::accumulate,
                                 &avx2::scale};
#endif
#if defined(CODEGRAPH_HAVE_NEON)
constexpr KernelTable kNeonTable{&neon::squared_l2, &neon::squared_l2_rows, &neon::accumulate,
                                 &neon::scale};
#endif

std::atomic<Backend>& active() {
  static std::atomic<Backend> backend{best_backend()};
  return backend;
}

const KernelTable& current() noexcept { return *table_for(active().load(std::memory_order_relaxed)); }

}  // namespace

std::string_view backend_name(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
    case Backend::kNeon: return "neon";
  }
  return "unknown";
}

bool backend_supported(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar: return true;
    case Backend::kAvx2:
#if defined(CODEGRAPH_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::kNeon:
#if defined(CODEGRAPH_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend best_backend() noexcept {
  if (backend_supported(Backend::kAvx2)) return Backend::kAvx2;
  if (backend_supported(Backend::kNeon)) return Backend::kNeon;
  return Backend::kScalar;
}

Backend active_backend() noexcept { return active().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!backend_supported(backend))
    fail(ErrorCode::kInvalidArgument,
         "SIMD backend '" + std::string(backend_name(backend)) + "' is not available on this CPU");
  active().store(backend, std::memory_order_relaxed);
}

Backend parse_backend(std::string_view name) {
  if (name == "auto") return best_backend();
  if (name == "scalar") return Backend::kScalar;
  if (name == "avx2") return Backend::kAvx2;
  if (name == "neon") return Backend::kNeon;
  fail(ErrorCode::kConfigError, "unknown SIMD backend '" + std::string(name) + "'");
}

const KernelTable* table_for(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar: return &kScalarTable;
    case Backend::kAvx2:
#if defined(CODEGRAPH_HAVE_AVX2)
      return &kAvx2Table;
#else
      return nullptr;
#endif
    case Backend::kNeon:
#if defined(CODEGRAPH_HAVE_NEON)
      return &kNeonTable;
#else
      return nullptr;
#endif
  }
  return nullptr;
}

float squared_l2(const float* a, const float* b, std::size_t dim) noexcept {
  return current().squared_l2(a, b, dim);
}

void squared_l2_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim,
                     float* out) noexcept {
  current().squared_l2_rows(query, rows, n_rows, dim, out);
}

void accumulate(float* dst, const float* src, std::size_t n) noexcept {
  current().accumulate(dst, src, n);
}

void scale(float* dst, float factor, std::size_t n) noexcept { current().scale(dst, factor, n); }

}  // namespace codegraph::kernels
