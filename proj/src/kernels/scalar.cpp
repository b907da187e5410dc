// SPDX-License-Identifier: Apache-2.0

#include "kernels_impl.hpp"

#include <algorithm>

namespace itpatch::kernels {

namespace {

void blend_weighted_scalar(float* dst, const float* weight, const float* target, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = dst[i] * (1.0f - weight[i]) + weight[i] * target[i];
  }
}

double squared_distance_scalar(const float* a, const float* b, std::size_t n) {
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i] - b[i]);
    acc += d * d;
  }
  return acc;
}

void convolve_rows_scalar(const float* src, float* dst, int width, int height, const float* taps,
                          int ntaps) {
  const int radius = ntaps / 2;
  for (int y = 0; y < height; ++y) {
    const float* in = src + static_cast<std::ptrdiff_t>(y) * width;
    float* out = dst + static_cast<std::ptrdiff_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      out[x] = detail::row_tap_sum(in, width, x, taps, ntaps, radius);
    }
  }
}

void convolve_cols_scalar(const float* src, float* dst, int width, int height, const float* taps,
                          int ntaps) {
  const int radius = ntaps / 2;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      dst[static_cast<std::ptrdiff_t>(y) * width + x] =
          detail::col_tap_sum(src, width, height, x, y, taps, ntaps, radius);
    }
  }
}

}  // namespace

const KernelTable& scalar() {
  static const KernelTable table{"scalar", blend_weighted_scalar, squared_distance_scalar,
                                 convolve_rows_scalar, convolve_cols_scalar};
  return table;
}

}  // namespace itpatch::kernels
