// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "itpatch/error.hpp"
#include "itpatch/kernels.hpp"
#include "itpatch/localization.hpp"

namespace itpatch {

namespace {

std::vector<float> gaussian_taps(int size, double sigma) {
  std::vector<float> taps(static_cast<std::size_t>(size));
  const int r = size / 2;
  double sum = 0;
  for (int i = 0; i < size; ++i) {
    const double d = i - r;
    const double v = std::exp(-d * d / (2 * sigma * sigma));
    taps[static_cast<std::size_t>(i)] = static_cast<float>(v);
    sum += v;
  }
  for (auto& t : taps) t = static_cast<float>(t / sum);
  return taps;
}

}  // namespace

Mask canny_edges(const ImageBuffer& img, double low, double high) {
  img.require_space(ColorSpace::RGB, "canny_edges");
  if (!(low < high)) throw ContractViolation("canny: low threshold must be below high");
  const int w = img.width(), h = img.height();
  Mask edges(w, h);
  if (img.empty()) return edges;
  const std::size_t n = img.pixel_count();

  static const std::vector<float> taps = gaussian_taps(5, 1.4);
  std::vector<float> plane(n), smooth(n);
  std::vector<float> mag(n, 0.0f), gxs(n, 0.0f), gys(n, 0.0f);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) plane[static_cast<std::size_t>(y * w + x)] = img.at(x, y, c) * 255.0f;
    }
    kernels::convolve_separable(plane, smooth, w, h, taps);
    auto at = [&](int x, int y) {
      return smooth[static_cast<std::size_t>(std::clamp(y, 0, h - 1) * w + std::clamp(x, 0, w - 1))];
    };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const float gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1)) -
                         (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
        const float gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1)) -
                         (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
        const std::size_t i = static_cast<std::size_t>(y * w + x);
        const float m = std::hypot(gx, gy);
        if (m > mag[i]) {
          mag[i] = m;
          gxs[i] = gx;
          gys[i] = gy;
        }
      }
    }
  }
  std::vector<std::uint8_t> dir(n);  // 0: horizontal gradient, 1: 45, 2: vertical, 3: 135
  for (std::size_t i = 0; i < n; ++i) {
    double angle = std::atan2(double(gys[i]), double(gxs[i])) * 180.0 / 3.14159265358979323846;
    if (angle < 0) angle += 180.0;
    if (angle < 22.5 || angle >= 157.5) {
      dir[i] = 0;
    } else if (angle < 67.5) {
      dir[i] = 1;
    } else if (angle < 112.5) {
      dir[i] = 2;
    } else {
      dir[i] = 3;
    }
  }

  auto mag_at = [&](int x, int y) -> float {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0f;
    return mag[static_cast<std::size_t>(y * w + x)];
  };
  // Ties along the gradient keep the pixel on the negative side only, so a
  // symmetric step yields a single-pixel line.
  constexpr int kNx[] = {1, 1, 0, -1};
  constexpr int kNy[] = {0, 1, 1, 1};
  std::vector<std::uint8_t> state(n, 0);  // 0 none, 1 weak, 2 strong
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y * w + x);
      const float m = mag[i];
      if (!(m > low)) continue;
      const int d = dir[i];
      const float before = mag_at(x - kNx[d], y - kNy[d]);
      const float after = mag_at(x + kNx[d], y + kNy[d]);
      if (!(m > before && m >= after)) continue;
      if (m > high) {
        state[i] = 2;
        queue.emplace_back(x, y);
      } else {
        state[i] = 1;
      }
    }
  }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    edges.set(x, y, true);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = x + dx, ny = y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        auto& s = state[static_cast<std::size_t>(ny * w + nx)];
        if (s == 1) {
          s = 2;
          queue.emplace_back(nx, ny);
        }
      }
    }
  }
  return edges;
}

}  // namespace itpatch
