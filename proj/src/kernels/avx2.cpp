// SPDX-License-Identifier: Apache-2.0

#include "kernels_impl.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define ITPATCH_HAVE_AVX2_KERNELS 1
#include <immintrin.h>
#endif

namespace itpatch::kernels {

#if ITPATCH_HAVE_AVX2_KERNELS

// Functions carry a target attribute instead of compiling the whole file with
// -mavx2, so no AVX2 code can leak into shared inline instantiations.
#define ITPATCH_AVX2 __attribute__((target("avx2")))

namespace {

ITPATCH_AVX2 void blend_weighted_avx2(float* dst, const float* weight, const float* target,
                                      std::size_t n) {
  const __m256 one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 d = _mm256_loadu_ps(dst + i);
    const __m256 w = _mm256_loadu_ps(weight + i);
    const __m256 t = _mm256_loadu_ps(target + i);
    const __m256 keep = _mm256_mul_ps(d, _mm256_sub_ps(one, w));
    _mm256_storeu_ps(dst + i, _mm256_add_ps(keep, _mm256_mul_ps(w, t)));
  }
  for (; i < n; ++i) dst[i] = dst[i] * (1.0f - weight[i]) + weight[i] * target[i];
}

ITPATCH_AVX2 double squared_distance_avx2(const float* a, const float* b, std::size_t n) {
  __m256d acc_lo = _mm256_setzero_pd();
  __m256d acc_hi = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 d = _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
    const __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(d));
    const __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(d, 1));
    acc_lo = _mm256_add_pd(acc_lo, _mm256_mul_pd(lo, lo));
    acc_hi = _mm256_add_pd(acc_hi, _mm256_mul_pd(hi, hi));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(acc_lo, acc_hi));
  double acc = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i] - b[i]);
    acc += d * d;
  }
  return acc;
}

ITPATCH_AVX2 void convolve_rows_avx2(const float* src, float* dst, int width, int height,
                                     const float* taps, int ntaps) {
  const int radius = ntaps / 2;
  for (int y = 0; y < height; ++y) {
    const float* in = src + static_cast<std::ptrdiff_t>(y) * width;
    float* out = dst + static_cast<std::ptrdiff_t>(y) * width;
    int x = 0;
    for (; x < std::min(radius, width); ++x) {
      out[x] = detail::row_tap_sum(in, width, x, taps, ntaps, radius);
    }
    // Interior: every tap in bounds for all eight lanes.
    for (; x + 8 + radius <= width; x += 8) {
      __m256 acc = _mm256_setzero_ps();
      for (int k = 0; k < ntaps; ++k) {
        const __m256 v = _mm256_loadu_ps(in + x + k - radius);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(taps[k]), v));
      }
      _mm256_storeu_ps(out + x, acc);
    }
    for (; x < width; ++x) out[x] = detail::row_tap_sum(in, width, x, taps, ntaps, radius);
  }
}

ITPATCH_AVX2 void convolve_cols_avx2(const float* src, float* dst, int width, int height,
                                     const float* taps, int ntaps) {
  const int radius = ntaps / 2;
  for (int y = 0; y < height; ++y) {
    float* out = dst + static_cast<std::ptrdiff_t>(y) * width;
    int x = 0;
    for (; x + 8 <= width; x += 8) {
      __m256 acc = _mm256_setzero_ps();
      for (int k = 0; k < ntaps; ++k) {
        const int sy = std::clamp(y + k - radius, 0, height - 1);
        const __m256 v = _mm256_loadu_ps(src + static_cast<std::ptrdiff_t>(sy) * width + x);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(taps[k]), v));
      }
      _mm256_storeu_ps(out + x, acc);
    }
    for (; x < width; ++x) {
      out[x] = detail::col_tap_sum(src, width, height, x, y, taps, ntaps, radius);
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2", blend_weighted_avx2, squared_distance_avx2,
                                 convolve_rows_avx2, convolve_cols_avx2};
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") ? &table : nullptr;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace itpatch::kernels
