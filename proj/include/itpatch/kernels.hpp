// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Data-parallel inner loops. Every kernel has a portable scalar reference and
// optional AVX2 / NEON variants; the fastest one the CPU supports is picked
// once at first use. Set ITPATCH_SIMD=scalar to force the reference path.
//
// blend_weighted and the convolutions perform the same IEEE operations in the
// same order in every variant, so their results are bit-identical across
// tables. squared_distance only differs by summation order.
namespace itpatch::kernels {

struct KernelTable {
  const char* name;

  // dst[i] = dst[i] * (1 - weight[i]) + weight[i] * target[i]
  void (*blend_weighted)(float* dst, const float* weight, const float* target, std::size_t n);

  // Σ (a[i] - b[i])², accumulated in double.
  double (*squared_distance)(const float* a, const float* b, std::size_t n);

  // Single-channel plane, odd tap count, edge pixels replicated.
  void (*convolve_rows)(const float* src, float* dst, int width, int height, const float* taps,
                        int ntaps);
  void (*convolve_cols)(const float* src, float* dst, int width, int height, const float* taps,
                        int ntaps);
};

const KernelTable& scalar();
// nullptr when not compiled in or unsupported by this CPU.
const KernelTable* avx2();
const KernelTable* neon();

// Every table usable on this machine, scalar first.
std::vector<const KernelTable*> available();

const KernelTable& active();

inline void blend_weighted(std::span<float> dst, std::span<const float> weight,
                           std::span<const float> target) {
  active().blend_weighted(dst.data(), weight.data(), target.data(), dst.size());
}

inline double squared_distance(std::span<const float> a, std::span<const float> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

// Separable convolution of a width x height plane (rows then columns).
void convolve_separable(std::span<const float> src, std::span<float> dst, int width, int height,
                        std::span<const float> taps);

}  // namespace itpatch::kernels
