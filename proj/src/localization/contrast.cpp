// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>

#include "itpatch/error.hpp"
#include "itpatch/localization.hpp"

namespace itpatch {

namespace {

// Linear interpolation between closest ranks (numpy's default).
double percentile(const std::vector<float>& sorted, double p) {
  const double pos = p / 100.0 * double(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - double(lo);
  return double(sorted[lo]) + (double(sorted[hi]) - double(sorted[lo])) * frac;
}

}  // namespace

double contrast_ratio(const ImageBuffer& img) {
  img.require_space(ColorSpace::RGB, "contrast_ratio");
  if (img.empty()) throw ContractViolation("contrast_ratio of an empty image");
  std::vector<float> v;
  v.reserve(img.pixel_count());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) v.push_back(value_channel(img.pixel(x, y)));
  }
  std::sort(v.begin(), v.end());
  const double range = double(v.back()) - double(v.front());
  if (range <= 0) return 0.0;
  return (percentile(v, 99) - percentile(v, 1)) / range;
}

bool is_low_contrast(const ImageBuffer& img, double threshold) {
  return contrast_ratio(img) < threshold;
}

ImageBuffer equalize(const ImageBuffer& img) {
  img.require_space(ColorSpace::RGB, "equalize");
  if (img.empty()) return img;
  std::array<std::size_t, 256> hist{};
  std::vector<int> level(img.pixel_count());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int v = static_cast<int>(value_channel(img.pixel(x, y)));
      level[static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width()) + static_cast<std::size_t>(x)] = v;
      ++hist[static_cast<std::size_t>(v)];
    }
  }
  const std::size_t total = img.pixel_count();
  // A single occupied bin maps to itself.
  if (std::any_of(hist.begin(), hist.end(), [&](std::size_t c) { return c == total; })) return img;

  std::array<float, 256> lut{};
  std::size_t cdf = 0;
  for (std::size_t i = 0; i < 256; ++i) {
    cdf += hist[i];
    lut[i] = static_cast<float>(std::floor(255.0 * double(cdf) / double(total) + 0.5));
  }

  ImageBuffer out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const int old_v = level[static_cast<std::size_t>(y) * static_cast<std::size_t>(img.width()) + static_cast<std::size_t>(x)];
      const float new_v = lut[static_cast<std::size_t>(old_v)] / 255.0f;
      auto p = img.pixel(x, y);
      const float mx = std::max({p[0], p[1], p[2]});
      if (mx <= 0.0f) {
        out.set_pixel(x, y, {new_v, new_v, new_v});
        continue;
      }
      const float scale = new_v / mx;
      for (auto& c : p) c = std::clamp(c * scale, 0.0f, 1.0f);
      out.set_pixel(x, y, p);
    }
  }
  return out;
}

}  // namespace itpatch
