// SPDX-License-Identifier: Apache-2.0

#include "itpatch/color.hpp"

#include <algorithm>
#include <cmath>

namespace itpatch {

namespace {

double round_half_up(double v) { return std::floor(v + 0.5); }

// D65 reference white
constexpr double kXn = 0.95047;
constexpr double kYn = 1.00000;
constexpr double kZn = 1.08883;

constexpr double kDelta = 6.0 / 29.0;

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double f) {
  return f > kDelta ? f * f * f : 3 * kDelta * kDelta * (f - 4.0 / 29.0);
}

template <typename Fn>
ImageBuffer map_pixels(const ImageBuffer& img, ColorSpace out_space, Fn fn) {
  ImageBuffer out(img.width(), img.height(), out_space);
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); i += 3) {
    const Triplet v = fn(Triplet{src[i], src[i + 1], src[i + 2]});
    dst[i] = v[0];
    dst[i + 1] = v[1];
    dst[i + 2] = v[2];
  }
  return out;
}

}  // namespace

Triplet rgb_to_hsv(const Triplet& rgb) {
  const double r = std::clamp<double>(rgb[0], 0, 1);
  const double g = std::clamp<double>(rgb[1], 0, 1);
  const double b = std::clamp<double>(rgb[2], 0, 1);
  const double mx = std::max({r, g, b});
  const double mn = std::min({r, g, b});
  const double delta = mx - mn;

  double hue_deg = 0;
  if (delta > 0) {
    if (mx == r) {
      hue_deg = 60.0 * (g - b) / delta;
    } else if (mx == g) {
      hue_deg = 120.0 + 60.0 * (b - r) / delta;
    } else {
      hue_deg = 240.0 + 60.0 * (r - g) / delta;
    }
    if (hue_deg < 0) hue_deg += 360.0;
  }
  double h = round_half_up(hue_deg / 2.0);
  if (h >= 180) h -= 180;
  const double s = mx > 0 ? round_half_up(delta / mx * 255.0) : 0.0;
  const double v = round_half_up(mx * 255.0);
  return {float(h), float(s), float(v)};
}

Triplet hsv_to_rgb(const Triplet& hsv) {
  const double hue_deg = std::fmod(double(hsv[0]) * 2.0, 360.0);
  const double s = std::clamp(double(hsv[1]) / 255.0, 0.0, 1.0);
  const double v = std::clamp(double(hsv[2]) / 255.0, 0.0, 1.0);
  const double c = v * s;
  const double hp = hue_deg / 60.0;
  const double x = c * (1 - std::fabs(std::fmod(hp, 2.0) - 1));
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(hp)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
  }
  const double m = v - c;
  return {float(r + m), float(g + m), float(b + m)};
}

Triplet rgb_to_lab(const Triplet& rgb) {
  const double r = srgb_to_linear(std::clamp<double>(rgb[0], 0, 1));
  const double g = srgb_to_linear(std::clamp<double>(rgb[1], 0, 1));
  const double b = srgb_to_linear(std::clamp<double>(rgb[2], 0, 1));
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / kXn);
  const double fy = lab_f(y / kYn);
  const double fz = lab_f(z / kZn);
  return {float(116.0 * fy - 16.0), float(500.0 * (fx - fy)), float(200.0 * (fy - fz))};
}

Triplet lab_to_rgb(const Triplet& lab) {
  const double fy = (double(lab[0]) + 16.0) / 116.0;
  const double fx = fy + double(lab[1]) / 500.0;
  const double fz = fy - double(lab[2]) / 200.0;
  const double x = kXn * lab_f_inv(fx);
  const double y = kYn * lab_f_inv(fy);
  const double z = kZn * lab_f_inv(fz);
  const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  auto out = [](double lin) {
    return float(std::clamp(linear_to_srgb(std::max(lin, 0.0)), 0.0, 1.0));
  };
  return {out(r), out(g), out(b)};
}

ImageBuffer rgb_to_hsv(const ImageBuffer& img) {
  img.require_space(ColorSpace::RGB, "rgb_to_hsv");
  return map_pixels(img, ColorSpace::HSV, [](const Triplet& p) { return rgb_to_hsv(p); });
}

ImageBuffer hsv_to_rgb(const ImageBuffer& img) {
  img.require_space(ColorSpace::HSV, "hsv_to_rgb");
  return map_pixels(img, ColorSpace::RGB, [](const Triplet& p) { return hsv_to_rgb(p); });
}

ImageBuffer rgb_to_lab(const ImageBuffer& img) {
  img.require_space(ColorSpace::RGB, "rgb_to_lab");
  return map_pixels(img, ColorSpace::LAB, [](const Triplet& p) { return rgb_to_lab(p); });
}

ImageBuffer lab_to_rgb(const ImageBuffer& img) {
  img.require_space(ColorSpace::LAB, "lab_to_rgb");
  return map_pixels(img, ColorSpace::RGB, [](const Triplet& p) { return lab_to_rgb(p); });
}

float value_channel(const Triplet& rgb) {
  const double mx = std::clamp<double>(std::max({rgb[0], rgb[1], rgb[2]}), 0, 1);
  return float(round_half_up(mx * 255.0));
}

float luma255(const Triplet& rgb) {
  return 255.0f * (0.299f * rgb[0] + 0.587f * rgb[1] + 0.114f * rgb[2]);
}

}  // namespace itpatch
