// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

#include "itpatch/image.hpp"

namespace itpatch {

using Triplet = std::array<float, 3>;

// Per-pixel conversions. HSV components are integers on the 8-bit scale
// (hue 0..179 in 2-degree steps), rounded half-up.
Triplet rgb_to_hsv(const Triplet& rgb);
Triplet hsv_to_rgb(const Triplet& hsv);

// sRGB companding, D65 white. lab_to_rgb clamps out-of-gamut results to [0,1].
Triplet rgb_to_lab(const Triplet& rgb);
Triplet lab_to_rgb(const Triplet& lab);

ImageBuffer rgb_to_hsv(const ImageBuffer& img);
ImageBuffer hsv_to_rgb(const ImageBuffer& img);
ImageBuffer rgb_to_lab(const ImageBuffer& img);
ImageBuffer lab_to_rgb(const ImageBuffer& img);

// HSV value channel on the 0..255 scale, the luminance used for contrast
// statistics and equalization.
float value_channel(const Triplet& rgb);

// Rec.601 luma scaled to 0..255; the intensity fed to the edge detector.
float luma255(const Triplet& rgb);

}  // namespace itpatch
