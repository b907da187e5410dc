// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "itpatch/error.hpp"
#include "itpatch/localization.hpp"

namespace itpatch {

bool HsvRange::contains(const Triplet& hsv) const {
  for (int c = 0; c < 3; ++c) {
    if (hsv[c] < lower[c] || hsv[c] > upper[c]) return false;
  }
  return true;
}

std::vector<HsvRange> default_hsv_ranges() {
  return {
      {"yellow", {20, 40, 50}, {35, 255, 210}},
      {"blue", {90, 40, 50}, {120, 255, 210}},
      {"red1", {0, 40, 50}, {10, 255, 210}},
      {"red2", {165, 40, 50}, {179, 255, 210}},
      {"black", {0, 40, 50}, {10, 255, 210}},
  };
}

HsvRange black_v_range() { return {"black", {0, 0, 0}, {179, 255, 60}}; }

void LocalizerConfig::validate() const {
  if (!(contrast_threshold > 0 && contrast_threshold < 1)) {
    throw ConfigError("localizer.contrast_threshold must lie in (0, 1)");
  }
  if (!(canny_low < canny_high)) throw ConfigError("localizer.canny_low must be below canny_high");
  if (canny_low < 0) throw ConfigError("localizer.canny_low must be non-negative");
  if (morph_kernel < 1 || morph_kernel % 2 == 0) {
    throw ConfigError("localizer.morph_kernel must be a positive odd size");
  }
  if (morph_iterations < 0) throw ConfigError("localizer.morph_iterations must be non-negative");
  if (!(min_area_fraction >= 0 && min_area_fraction < 1)) {
    throw ConfigError("localizer.min_area_fraction must lie in [0, 1)");
  }
  if (!(interior_erosion_fraction > 0 && interior_erosion_fraction < 1)) {
    throw ConfigError("localizer.interior_erosion_fraction must lie in (0, 1)");
  }
  if (hsv_ranges.empty()) throw ConfigError("localizer.hsv_ranges must not be empty");
  for (const auto& r : hsv_ranges) {
    for (int c = 0; c < 3; ++c) {
      if (r.lower[c] > r.upper[c]) {
        throw ConfigError("localizer.hsv_ranges." + r.name + ": lower exceeds upper");
      }
    }
  }
}

std::vector<HsvRange> LocalizerConfig::effective_ranges() const {
  std::vector<HsvRange> out = hsv_ranges;
  if (!use_black_v_range) return out;
  bool replaced = false;
  for (auto& r : out) {
    if (r.name == "black") {
      r = black_v_range();
      replaced = true;
    }
  }
  if (!replaced) out.push_back(black_v_range());
  return out;
}

const char* to_string(RegionSource source) {
  return source == RegionSource::EdgeBased ? "edge" : "color";
}

const char* to_string(RegionVariant variant) {
  switch (variant) {
    case RegionVariant::Whole:
      return "whole";
    case RegionVariant::Interior:
      return "interior";
    case RegionVariant::Border:
      return "border";
  }
  return "?";
}

RegionVariant parse_region_variant(const std::string& name) {
  if (name == "whole") return RegionVariant::Whole;
  if (name == "interior") return RegionVariant::Interior;
  if (name == "border") return RegionVariant::Border;
  throw ConfigError("unknown region variant: " + name);
}

SignRegion make_region(Mask mask, RegionSource source, RegionVariant variant) {
  SignRegion r;
  r.bbox = mask.bounding_box();
  r.mask = std::move(mask);
  r.source = source;
  r.variant = variant;
  return r;
}

const SignRegion& Localization::select(RegionVariant variant) const {
  switch (variant) {
    case RegionVariant::Interior:
      return interior;
    case RegionVariant::Border:
      return border;
    case RegionVariant::Whole:
      break;
  }
  return whole;
}

Mask raw_color_mask(const ImageBuffer& img, const std::vector<HsvRange>& ranges) {
  img.require_space(ColorSpace::RGB, "raw_color_mask");
  Mask out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const Triplet hsv = rgb_to_hsv(img.pixel(x, y));
      for (const auto& r : ranges) {
        if (r.contains(hsv)) {
          out.set(x, y, true);
          break;
        }
      }
    }
  }
  return out;
}

Mask color_mask(const ImageBuffer& img, const std::vector<HsvRange>& ranges, int kernel,
                int iterations) {
  const Mask k = elliptical_kernel(kernel);
  return close(open(raw_color_mask(img, ranges), k, iterations), k, iterations);
}

namespace {

Mask edge_candidate(const ImageBuffer& img, const LocalizerConfig& cfg) {
  const Mask edges = canny_edges(img, cfg.canny_low, cfg.canny_high);
  const Mask square(3, 3, 1);
  return largest_component(fill_enclosed(close(edges, square, 1)));
}

}  // namespace

Localization localize(const ImageBuffer& img, const LocalizerConfig& cfg) {
  img.require_space(ColorSpace::RGB, "localize");
  cfg.validate();
  if (img.empty()) throw NoRegionFound("empty image");

  Localization loc;
  const ImageBuffer* src = &img;
  ImageBuffer eq;
  if (is_low_contrast(img, cfg.contrast_threshold)) {
    eq = equalize(img);
    src = &eq;
    loc.equalized = true;
  }

  Mask edge = edge_candidate(*src, cfg);
  Mask color = largest_component(
      color_mask(*src, cfg.effective_ranges(), cfg.morph_kernel, cfg.morph_iterations));

  const double floor_px = cfg.min_area_fraction * double(img.pixel_count());
  const bool edge_ok = double(edge.count()) >= floor_px && edge.any();
  const bool color_ok = double(color.count()) >= floor_px && color.any();
  if (!edge_ok && !color_ok) throw NoRegionFound("no sign candidate reaches the area floor");

  const bool take_color = color_ok && (!edge_ok || color.count() > edge.count());
  Mask whole = take_color ? std::move(color) : std::move(edge);
  const RegionSource source = take_color ? RegionSource::ColorBased : RegionSource::EdgeBased;

  const BBox box = whole.bounding_box();
  const double inscribed = std::min(box.width() + 1, box.height() + 1) / 2.0;
  const int radius = std::max(1, static_cast<int>(std::lround(cfg.interior_erosion_fraction * inscribed)));
  Mask interior = erode(whole, elliptical_kernel(2 * radius + 1), 1);
  Mask border = whole.minus(interior);

  loc.whole = make_region(std::move(whole), source, RegionVariant::Whole);
  loc.interior = make_region(std::move(interior), source, RegionVariant::Interior);
  loc.border = make_region(std::move(border), source, RegionVariant::Border);
  return loc;
}

}  // namespace itpatch
