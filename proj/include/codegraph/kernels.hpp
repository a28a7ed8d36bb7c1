// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string_view>

// Data-parallel inner loops. Every kernel has a scalar reference in
// codegraph::kernels::scalar; vector variants (AVX2+FMA on x86-64, NEON on
// aarch64) are chosen once at startup from the CPU's capabilities and can be
// overridden for testing. Vector variants reassociate the reduction, so they
// agree with the scalar reference to rounding, not bitwise.

namespace codegraph::kernels {

enum class Backend { kScalar, kAvx2, kNeon };

std::string_view backend_name(Backend backend) noexcept;
bool backend_supported(Backend backend) noexcept;
Backend best_backend() noexcept;
Backend active_backend() noexcept;
// Throws Error(kInvalidArgument) when the backend is not supported here.
void set_backend(Backend backend);
Backend parse_backend(std::string_view name);

// sum_k (a[k] - b[k])^2
float squared_l2(const float* a, const float* b, std::size_t dim) noexcept;

// out[r] = squared_l2(query, rows + r * dim, dim) for r in [0, n_rows)
void squared_l2_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim,
                     float* out) noexcept;

// dst[k] += src[k]
void accumulate(float* dst, const float* src, std::size_t n) noexcept;

// dst[k] *= factor
void scale(float* dst, float factor, std::size_t n) noexcept;

struct KernelTable {
  float (*squared_l2)(const float*, const float*, std::size_t) noexcept;
  void (*squared_l2_rows)(const float*, const float*, std::size_t, std::size_t, float*) noexcept;
  void (*accumulate)(float*, const float*, std::size_t) noexcept;
  void (*scale)(float*, float, std::size_t) noexcept;
};

// Direct access to one backend's table (used by equivalence tests);
// nullptr when the backend was not compiled in.
const KernelTable* table_for(Backend backend) noexcept;

namespace scalar {
float squared_l2(const float* a, const float* b, std::size_t dim) noexcept;
void squared_l2_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim,
                     float* out) noexcept;
void accumulate(float* dst, const float* src, std::size_t n) noexcept;
void scale(float* dst, float factor, std::size_t n) noexcept;
}  // namespace scalar

}  // namespace codegraph::kernels
