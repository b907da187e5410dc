// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

#include "itpatch/color.hpp"
#include "itpatch/image.hpp"

namespace itpatch {

// Row-major 3x3 matrix mapping source pixel-center coordinates (x, y, 1) to
// destination coordinates.
struct Homography {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Homography identity() { return {}; }
  static Homography translation(double dx, double dy);
  static Homography scaling(double sx, double sy);
  // Counter-clockwise on screen for positive degrees (y points down).
  static Homography rotation(double degrees);
  // Conjugates `h` so it acts about (cx, cy) instead of the origin.
  static Homography about(const Homography& h, double cx, double cy);

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }
  double determinant() const;
  // Throws ContractViolation when singular.
  Homography inverse() const;
  std::array<double, 2> apply(double x, double y) const;

  // this ∘ rhs: apply rhs first.
  Homography operator*(const Homography& rhs) const;
};

// Inverse-maps every output pixel through `h` and samples bilinearly.
// Sample points within half a pixel of the source border clamp to the edge;
// anything farther out takes `background`.
ImageBuffer warp(const ImageBuffer& img, const Homography& h, int out_width, int out_height,
                 Triplet background = {0, 0, 0});

// Nearest-neighbour warp of a binary mask; outside pixels are 0.
Mask warp(const Mask& mask, const Homography& h, int out_width, int out_height);

}  // namespace itpatch
