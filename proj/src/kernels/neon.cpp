// SPDX-License-Identifier: Apache-2.0
#include <arm_neon.h>

#include "kernels/backends.hpp"

namespace codegraph::kernels::neon {

float squared_l2(const float* a, const float* b, std::size_t dim) noexcept {
  std::size_t k = 0;
  float32x4_t acc0 = vdupq_n_f32(0.0f);
  float32x4_t acc1 = vdupq_n_f32(0.0f);
  for (; k + 8 <= dim; k += 8) {
    const float32x4_t d0 = vsubq_f32(vld1q_f32(a + k), vld1q_f32(b + k));
    const float32x4_t d1 = vsubq_f32(vld1q_f32(a + k + 4), vld1q_f32(b + k + 4));
    acc0 = vfmaq_f32(acc0, d0, d0);
    acc1 = vfmaq_f32(acc1, d1, d1);
  }
  float res = vaddvq_f32(vaddq_f32(acc0, acc1));
  for (; k < dim; ++k) {
    const float d = a[k] - b[k];
    res += d * d;
  }
  return res;
}

void squared_l2_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim,
                     float* out) noexcept {
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = squared_l2(query, rows + r * dim, dim);
}

void accumulate(float* dst, const float* src, std::size_t n) noexcept {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) vst1q_f32(dst + k, vaddq_f32(vld1q_f32(dst + k), vld1q_f32(src + k)));
  for (; k < n; ++k) dst[k] += src[k];
}

void scale(float* dst, float factor, std::size_t n) noexcept {
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) vst1q_f32(dst + k, vmulq_n_f32(vld1q_f32(dst + k), factor));
  for (; k < n; ++k) dst[k] *= factor;
}

}  // namespace codegraph::kernels::neon
