// SPDX-License-Identifier: Apache-2.0
// Compiled with -mavx2 -mfma; only reached after a runtime cpuid check.
#include <immintrin.h>

#include "kernels/backends.hpp"

namespace codegraph::kernels::avx2 {

namespace {

inline float horizontal_sum(__m256 v) noexcept {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

}  // namespace

float squared_l2(const float* a, const float* b, std::size_t dim) noexcept {
  std::size_t k = 0;
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  for (; k + 16 <= dim; k += 16) {
    const __m256 d0 = _mm256_sub_ps(_mm256_loadu_ps(a + k), _mm256_loadu_ps(b + k));
    const __m256 d1 = _mm256_sub_ps(_mm256_loadu_ps(a + k + 8), _mm256_loadu_ps(b + k + 8));
    acc0 = _mm256_fmadd_ps(d0, d0, acc0);
    acc1 = _mm256_fmadd_ps(d1, d1, acc1);
  }
  if (k + 8 <= dim) {
    const __m256 d0 = _mm256_sub_ps(_mm256_loadu_ps(a + k), _mm256_loadu_ps(b + k));
    acc0 = _mm256_fmadd_ps(d0, d0, acc0);
    k += 8;
  }
  float res = horizontal_sum(_mm256_add_ps(acc0, acc1));
  for (; k < dim; ++k) {
    const float d = a[k] - b[k];
    res += d * d;
  }
  return res;
}

void squared_l2_rows(const float* query, const float* rows, std::size_t n_rows, std::size_t dim,
                     float* out) noexcept {
  // Four rows per pass share each query load.
  std::size_t r = 0;
  if (dim % 8 == 0) {
    for (; r + 4 <= n_rows; r += 4) {
      const float* r0 = rows + (r + 0) * dim;
      const float* r1 = rows + (r + 1) * dim;
      const float* r2 = rows + (r + 2) * dim;
      const float* r3 = rows + (r + 3) * dim;
      __m256 a0 = _mm256_setzero_ps();
      __m256 a1 = _mm256_setzero_ps();
      __m256 a2 = _mm256_setzero_ps();
      __m256 a3 = _mm256_setzero_ps();
      for (std::size_t k = 0; k < dim; k += 8) {
        const __m256 q = _mm256_loadu_ps(query + k);
        const __m256 d0 = _mm256_sub_ps(q, _mm256_loadu_ps(r0 + k));
        const __m256 d1 = _mm256_sub_ps(q, _mm256_loadu_ps(r1 + k));
        const __m256 d2 = _mm256_sub_ps(q, _mm256_loadu_ps(r2 + k));
        const __m256 d3 = _mm256_sub_ps(q, _mm256_loadu_ps(r3 + k));
        a0 = _mm256_fmadd_ps(d0, d0, a0);
        a1 = _mm256_fmadd_ps(d1, d1, a1);
        a2 = _mm256_fmadd_ps(d2, d2, a2);
        a3 = _mm256_fmadd_ps(d3, d3, a3);
      }
      out[r + 0] = horizontal_sum(a0);
      out[r + 1] = horizontal_sum(a1);
      out[r + 2] = horizontal_sum(a2);
      out[r + 3] = horizontal_sum(a3);
    }
  }
  for (; r < n_rows; ++r) out[r] = squared_l2(query, rows + r * dim, dim);
}

void accumulate(float* dst, const float* src, std::size_t n) noexcept {
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8)
    _mm256_storeu_ps(dst + k, _mm256_add_ps(_mm256_loadu_ps(dst + k), _mm256_loadu_ps(src + k)));
  for (; k < n; ++k) dst[k] += src[k];
}

void scale(float* dst, float factor, std::size_t n) noexcept {
  const __m256 f = _mm256_set1_ps(factor);
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) _mm256_storeu_ps(dst + k, _mm256_mul_ps(_mm256_loadu_ps(dst + k), f));
  for (; k < n; ++k) dst[k] *= factor;
}

}  // namespace codegraph::kernels::avx2
