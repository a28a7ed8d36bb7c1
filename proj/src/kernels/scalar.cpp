// SPDX-License-Identifier: Apache-2.0
#include "codegraph/kernels.hpp"

namespace codegraph::kernels::scalar {

float squared_l2(const float* a, const float* b, std::size_t dim) noexcept {
  float acc = 0.0f;
  for (std::size_t k = 0; k < dim; ++k) {
    const float d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

void squared_l2_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim,
                     float* out) noexcept {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = squared_l2(query, rows + r * dim, dim);
}

void accumulate(float* dst, const float* src, std::size_t n) noexcept {
  for (std::size_t k = 0; k < n; ++k) dst[k] += src[k];
}

void scale(float* dst, float factor, std::size_t n) noexcept {
  for (std::size_t k = 0; k < n; ++k) dst[k] *= factor;
}

}  // namespace codegraph::kernels::scalar
