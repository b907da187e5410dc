// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "itpatch/color.hpp"
#include "itpatch/image.hpp"

namespace itpatch {

// Inclusive HSV box on the 8-bit scale.
struct HsvRange {
  std::string name;
  Triplet lower;
  Triplet upper;

  bool contains(const Triplet& hsv) const;
};

// The sign palette: yellow, blue, two red bands and black. The black row is
// carried exactly as published, which duplicates the first red band.
std::vector<HsvRange> default_hsv_ranges();

// Replacement black row keyed on darkness alone (V <= 60, any saturation).
HsvRange black_v_range();

struct LocalizerConfig {
  double contrast_threshold = 0.05;
  double canny_low = 50;
  double canny_high = 150;
  std::vector<HsvRange> hsv_ranges = default_hsv_ranges();
  bool use_black_v_range = false;
  int morph_kernel = 5;
  int morph_iterations = 2;
  // Candidates smaller than this fraction of the image are discarded.
  double min_area_fraction = 0.005;
  // Interior = Whole eroded by this fraction of the inscribed radius.
  double interior_erosion_fraction = 0.25;

  // Throws ConfigError on violated invariants.
  void validate() const;
  // hsv_ranges with the black override applied when enabled.
  std::vector<HsvRange> effective_ranges() const;
};

enum class RegionSource { EdgeBased, ColorBased };
enum class RegionVariant { Whole, Interior, Border };

const char* to_string(RegionSource source);
const char* to_string(RegionVariant variant);
RegionVariant parse_region_variant(const std::string& name);

struct SignRegion {
  Mask mask;
  BBox bbox;
  RegionSource source = RegionSource::EdgeBased;
  RegionVariant variant = RegionVariant::Whole;

  std::size_t area() const { return mask.count(); }
};

// Builds a SignRegion from a mask, deriving the bounding box.
SignRegion make_region(Mask mask, RegionSource source, RegionVariant variant);

struct Localization {
  SignRegion whole;
  SignRegion interior;
  SignRegion border;
  bool equalized = false;

  const SignRegion& select(RegionVariant variant) const;
};

// (P99 - P1) / (max - min) of the HSV value channel; 0 for uniform images.
double contrast_ratio(const ImageBuffer& img);
bool is_low_contrast(const ImageBuffer& img, double threshold = 0.05);

// Histogram-equalizes the HSV value channel; hue and saturation are kept by
// rescaling each pixel's RGB triple.
ImageBuffer equalize(const ImageBuffer& img);

// Classic Canny on 0..255 channels: 5x5 Gaussian (sigma 1.4), Sobel per channel
// keeping the strongest, non-maximum suppression, hysteresis (8-connected).
Mask canny_edges(const ImageBuffer& img, double low, double high);

// Per-pixel palette test: set when the HSV pixel lies in any box.
Mask raw_color_mask(const ImageBuffer& img, const std::vector<HsvRange>& ranges);
// raw_color_mask followed by opening then closing with an elliptical kernel.
Mask color_mask(const ImageBuffer& img, const std::vector<HsvRange>& ranges, int kernel = 5,
                int iterations = 2);

// Morphology helpers. Pixels outside the grid never constrain the result.
Mask elliptical_kernel(int size);
Mask erode(const Mask& mask, const Mask& kernel, int iterations = 1);
Mask dilate(const Mask& mask, const Mask& kernel, int iterations = 1);
Mask open(const Mask& mask, const Mask& kernel, int iterations = 1);
Mask close(const Mask& mask, const Mask& kernel, int iterations = 1);

// Largest 8-connected component (ties keep the first in raster order).
Mask largest_component(const Mask& mask);
// Pixels not reachable from the border through 4-connected non-edge pixels.
Mask fill_enclosed(const Mask& edges);

// Throws NoRegionFound when neither candidate reaches the area floor.
Localization localize(const ImageBuffer& img, const LocalizerConfig& cfg = {});

}  // namespace itpatch
