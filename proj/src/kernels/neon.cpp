// SPDX-License-Identifier: Apache-2.0

#include "kernels_impl.hpp"

#if defined(__aarch64__)
#define ITPATCH_HAVE_NEON_KERNELS 1
#include <arm_neon.h>
#endif

namespace itpatch::kernels {

#if ITPATCH_HAVE_NEON_KERNELS

namespace {

void blend_weighted_neon(float* dst, const float* weight, const float* target, std::size_t n) {
  const float32x4_t one = vdupq_n_f32(1.0f);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t d = vld1q_f32(dst + i);
    const float32x4_t w = vld1q_f32(weight + i);
    const float32x4_t t = vld1q_f32(target + i);
    const float32x4_t keep = vmulq_f32(d, vsubq_f32(one, w));
    vst1q_f32(dst + i, vaddq_f32(keep, vmulq_f32(w, t)));
  }
  for (; i < n; ++i) dst[i] = dst[i] * (1.0f - weight[i]) + weight[i] * target[i];
}

double squared_distance_neon(const float* a, const float* b, std::size_t n) {
  float64x2_t acc_lo = vdupq_n_f64(0.0);
  float64x2_t acc_hi = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t d = vsubq_f32(vld1q_f32(a + i), vld1q_f32(b + i));
    const float64x2_t lo = vcvt_f64_f32(vget_low_f32(d));
    const float64x2_t hi = vcvt_high_f64_f32(d);
    acc_lo = vaddq_f64(acc_lo, vmulq_f64(lo, lo));
    acc_hi = vaddq_f64(acc_hi, vmulq_f64(hi, hi));
  }
  double acc = vaddvq_f64(vaddq_f64(acc_lo, acc_hi));
  for (; i < n; ++i) {
    const double d = static_cast<double>(a[i] - b[i]);
    acc += d * d;
  }
  return acc;
}

void convolve_rows_neon(const float* src, float* dst, int width, int height, const float* taps,
                        int ntaps) {
  const int radius = ntaps / 2;
  for (int y = 0; y < height; ++y) {
    const float* in = src + static_cast<std::ptrdiff_t>(y) * width;
    float* out = dst + static_cast<std::ptrdiff_t>(y) * width;
    int x = 0;
    for (; x < std::min(radius, width); ++x) {
      out[x] = detail::row_tap_sum(in, width, x, taps, ntaps, radius);
    }
    for (; x + 4 + radius <= width; x += 4) {
      float32x4_t acc = vdupq_n_f32(0.0f);
      for (int k = 0; k < ntaps; ++k) {
        acc = vaddq_f32(acc, vmulq_f32(vdupq_n_f32(taps[k]), vld1q_f32(in + x + k - radius)));
      }
      vst1q_f32(out + x, acc);
    }
    for (; x < width; ++x) out[x] = detail::row_tap_sum(in, width, x, taps, ntaps, radius);
  }
}

void convolve_cols_neon(const float* src, float* dst, int width, int height, const float* taps,
                        int ntaps) {
  const int radius = ntaps / 2;
  for (int y = 0; y < height; ++y) {
    float* out = dst + static_cast<std::ptrdiff_t>(y) * width;
    int x = 0;
    for (; x + 4 <= width; x += 4) {
      float32x4_t acc = vdupq_n_f32(0.0f);
      for (int k = 0; k < ntaps; ++k) {
        const int sy = std::clamp(y + k - radius, 0, height - 1);
        const float32x4_t v = vld1q_f32(src + static_cast<std::ptrdiff_t>(sy) * width + x);
        acc = vaddq_f32(acc, vmulq_f32(vdupq_n_f32(taps[k]), v));
      }
      vst1q_f32(out + x, acc);
    }
    for (; x < width; ++x) {
      out[x] = detail::col_tap_sum(src, width, height, x, y, taps, ntaps, radius);
    }
  }
}

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable table{"neon", blend_weighted_neon, squared_distance_neon,
                                 convolve_rows_neon, convolve_cols_neon};
  return &table;
}

#else

const KernelTable* neon_table() { return nullptr; }

#endif

}  // namespace itpatch::kernels
