// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>

#include "itpatch/kernels.hpp"

namespace itpatch::kernels {

const KernelTable* avx2_table();
const KernelTable* neon_table();

namespace detail {
namespace {

// Shared border handling: the SIMD variants fall back to these for the
// replicated-edge pixels so the arithmetic order never differs.
inline float row_tap_sum(const float* row, int width, int x, const float* taps, int ntaps,
                         int radius) {
  float acc = 0.0f;
  for (int k = 0; k < ntaps; ++k) {
    const int sx = std::clamp(x + k - radius, 0, width - 1);
    acc = acc + taps[k] * row[sx];
  }
  return acc;
}

inline float col_tap_sum(const float* src, int width, int height, int x, int y,
                         const float* taps, int ntaps, int radius) {
  float acc = 0.0f;
  for (int k = 0; k < ntaps; ++k) {
    const int sy = std::clamp(y + k - radius, 0, height - 1);
    acc = acc + taps[k] * src[static_cast<std::ptrdiff_t>(sy) * width + x];
  }
  return acc;
}

}  // namespace
}  // namespace detail
}  // namespace itpatch::kernels
