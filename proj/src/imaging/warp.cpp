// SPDX-License-Identifier: Apache-2.0

#include "itpatch/warp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "itpatch/error.hpp"

namespace itpatch {

Homography Homography::translation(double dx, double dy) {
  return {{1, 0, dx, 0, 1, dy, 0, 0, 1}};
}

Homography Homography::scaling(double sx, double sy) {
  return {{sx, 0, 0, 0, sy, 0, 0, 0, 1}};
}

Homography Homography::rotation(double degrees) {
  const double t = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  return {{c, s, 0, -s, c, 0, 0, 0, 1}};
}

Homography Homography::about(const Homography& h, double cx, double cy) {
  return translation(cx, cy) * h * translation(-cx, -cy);
}

double Homography::determinant() const {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Homography Homography::inverse() const {
  const double det = determinant();
  double scale = 0;
  for (double v : m) scale = std::max(scale, std::fabs(v));
  if (!(std::fabs(det) > 1e-12 * scale * scale * scale) || !std::isfinite(det)) {
    throw ContractViolation("singular homography");
  }
  Homography inv;
  inv.m = {(m[4] * m[8] - m[5] * m[7]) / det, (m[2] * m[7] - m[1] * m[8]) / det,
           (m[1] * m[5] - m[2] * m[4]) / det, (m[5] * m[6] - m[3] * m[8]) / det,
           (m[0] * m[8] - m[2] * m[6]) / det, (m[2] * m[3] - m[0] * m[5]) / det,
           (m[3] * m[7] - m[4] * m[6]) / det, (m[1] * m[6] - m[0] * m[7]) / det,
           (m[0] * m[4] - m[1] * m[3]) / det};
  return inv;
}

std::array<double, 2> Homography::apply(double x, double y) const {
  const double w = m[6] * x + m[7] * y + m[8];
  return {(m[0] * x + m[1] * y + m[2]) / w, (m[3] * x + m[4] * y + m[5]) / w};
}

Homography Homography::operator*(const Homography& rhs) const {
  Homography out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double acc = 0;
      for (int k = 0; k < 3; ++k) acc += (*this)(r, k) * rhs(k, c);
      out.m[static_cast<std::size_t>(r * 3 + c)] = acc;
    }
  }
  return out;
}

ImageBuffer warp(const ImageBuffer& img, const Homography& h, int out_width, int out_height,
                 Triplet background) {
  if (out_width <= 0 || out_height <= 0) throw ContractViolation("warp to empty size");
  if (img.empty()) throw ContractViolation("warp of empty image");
  const Homography inv = h.inverse();
  ImageBuffer out(out_width, out_height, img.space());
  const double max_x = img.width() - 0.5;
  const double max_y = img.height() - 0.5;
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const auto [sx, sy] = inv.apply(x, y);
      if (!(sx >= -0.5 && sx <= max_x && sy >= -0.5 && sy <= max_y)) {
        out.set_pixel(x, y, background);
        continue;
      }
      const double cx = std::clamp(sx, 0.0, double(img.width() - 1));
      const double cy = std::clamp(sy, 0.0, double(img.height() - 1));
      const int x0 = static_cast<int>(std::floor(cx));
      const int y0 = static_cast<int>(std::floor(cy));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const int y1 = std::min(y0 + 1, img.height() - 1);
      const float fx = static_cast<float>(cx - x0);
      const float fy = static_cast<float>(cy - y0);
      for (int c = 0; c < 3; ++c) {
        const float top = img.at(x0, y0, c) * (1 - fx) + img.at(x1, y0, c) * fx;
        const float bot = img.at(x0, y1, c) * (1 - fx) + img.at(x1, y1, c) * fx;
        out.at(x, y, c) = top * (1 - fy) + bot * fy;
      }
    }
  }
  return out;
}

Mask warp(const Mask& mask, const Homography& h, int out_width, int out_height) {
  if (out_width <= 0 || out_height <= 0) throw ContractViolation("warp to empty size");
  const Homography inv = h.inverse();
  Mask out(out_width, out_height);
  for (int y = 0; y < out_height; ++y) {
    for (int x = 0; x < out_width; ++x) {
      const auto [sx, sy] = inv.apply(x, y);
      const int nx = static_cast<int>(std::floor(sx + 0.5));
      const int ny = static_cast<int>(std::floor(sy + 0.5));
      if (mask.test(nx, ny)) out.set(x, y, true);
    }
  }
  return out;
}

}  // namespace itpatch
