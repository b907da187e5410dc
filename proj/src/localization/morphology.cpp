// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <deque>

#include "itpatch/error.hpp"
#include "itpatch/localization.hpp"

namespace itpatch {

namespace {

struct Offset {
  int dx, dy;
};

std::vector<Offset> kernel_offsets(const Mask& kernel) {
  const int cx = kernel.width() / 2;
  const int cy = kernel.height() / 2;
  std::vector<Offset> out;
  for (int y = 0; y < kernel.height(); ++y) {
    for (int x = 0; x < kernel.width(); ++x) {
      if (kernel(x, y)) out.push_back({x - cx, y - cy});
    }
  }
  return out;
}

Mask erode_once(const Mask& in, const std::vector<Offset>& offsets) {
  Mask out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      if (!in(x, y)) continue;
      bool keep = true;
      for (const auto& o : offsets) {
        const int sx = x + o.dx, sy = y + o.dy;
        if (in.contains(sx, sy) && !in(sx, sy)) {
          keep = false;
          break;
        }
      }
      if (keep) out.set(x, y, true);
    }
  }
  return out;
}

Mask dilate_once(const Mask& in, const std::vector<Offset>& offsets) {
  Mask out(in.width(), in.height());
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      for (const auto& o : offsets) {
        // Reflected element: out(x) = OR in(x - o).
        if (in.test(x - o.dx, y - o.dy)) {
          out.set(x, y, true);
          break;
        }
      }
    }
  }
  return out;
}

}  // namespace

Mask elliptical_kernel(int size) {
  if (size < 1) throw ContractViolation("kernel size must be positive");
  Mask k(size, size);
  const int r = size / 2;
  const int c = size / 2;
  const double inv_r2 = r > 0 ? 1.0 / (double(r) * r) : 0.0;
  for (int i = 0; i < size; ++i) {
    const int dy = i - r;
    int j1 = 0, j2 = 0;
    if (std::abs(dy) <= r) {
      const int dx = static_cast<int>(std::lround(c * std::sqrt((double(r) * r - dy * dy) * inv_r2)));
      j1 = std::max(c - dx, 0);
      j2 = std::min(c + dx + 1, size);
    }
    for (int j = j1; j < j2; ++j) k.set(j, i, true);
  }
  return k;
}

Mask erode(const Mask& mask, const Mask& kernel, int iterations) {
  const auto offsets = kernel_offsets(kernel);
  Mask out = mask;
  for (int i = 0; i < iterations; ++i) out = erode_once(out, offsets);
  return out;
}

Mask dilate(const Mask& mask, const Mask& kernel, int iterations) {
  const auto offsets = kernel_offsets(kernel);
  Mask out = mask;
  for (int i = 0; i < iterations; ++i) out = dilate_once(out, offsets);
  return out;
}

Mask open(const Mask& mask, const Mask& kernel, int iterations) {
  return dilate(erode(mask, kernel, iterations), kernel, iterations);
}

Mask close(const Mask& mask, const Mask& kernel, int iterations) {
  return erode(dilate(mask, kernel, iterations), kernel, iterations);
}

Mask largest_component(const Mask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<int> label(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), -1);
  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x); };
  int best_label = -1;
  std::size_t best_size = 0;
  int next = 0;
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y) || label[idx(x, y)] >= 0) continue;
      std::size_t size = 0;
      label[idx(x, y)] = next;
      queue.emplace_back(x, y);
      while (!queue.empty()) {
        const auto [px, py] = queue.front();
        queue.pop_front();
        ++size;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = px + dx, ny = py + dy;
            if (mask.test(nx, ny) && label[idx(nx, ny)] < 0) {
              label[idx(nx, ny)] = next;
              queue.emplace_back(nx, ny);
            }
          }
        }
      }
      if (size > best_size) {
        best_size = size;
        best_label = next;
      }
      ++next;
    }
  }
  Mask out(w, h);
  if (best_label < 0) return out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (label[idx(x, y)] == best_label) out.set(x, y, true);
    }
  }
  return out;
}

Mask fill_enclosed(const Mask& edges) {
  const int w = edges.width(), h = edges.height();
  Mask outside(w, h);
  std::deque<std::pair<int, int>> queue;
  auto seed = [&](int x, int y) {
    if (!edges(x, y) && !outside(x, y)) {
      outside.set(x, y, true);
      queue.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  constexpr int kDx[] = {1, -1, 0, 0};
  constexpr int kDy[] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int nx = x + kDx[k], ny = y + kDy[k];
      if (edges.contains(nx, ny)) seed(nx, ny);
    }
  }
  Mask filled(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) filled.set(x, y, !outside(x, y));
  }
  return filled;
}

}  // namespace itpatch
