// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "codegraph/kernels.hpp"

namespace codegraph::kernels {

#if defined(CODEGRAPH_HAVE_AVX2)
namespace avx2 {
float squared_l2(const float* a, const float* b, std::size_t dim) noexcept;
void squared_l2_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim,
                     float* out) noexcept;
void accumulate(float* dst, const float* src, std::size_t n) noexcept;
void scale(float* dst, float factor, std::size_t n) noexcept;
}  // namespace avx2
#endif

#if defined(CODEGRAPH_HAVE_NEON)
namespace neon {
float squared_l2(const float* a, const float* b, std::size_t dim) noexcept;
void squared_l2_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim,
                     float* out) noexcept;
void accumulate(float* dst, const float* src, std::size_t n) noexcept;
void scale(float* dst, float factor, std::size_t n) noexcept;
}  // namespace neon
#endif

}  // namespace codegraph::kernels
