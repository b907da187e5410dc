// SPDX-License-Identifier: Apache-2.0

#include "itpatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "itpatch/error.hpp"
#include "itpatch/transforms.hpp"

namespace itpatch {

namespace {

bool inside(SynthShape shape, double dx, double dy, double half) {
  switch (shape) {
    case SynthShape::Disk:
      return dx * dx + dy * dy <= half * half;
    case SynthShape::Square:
      return std::fabs(dx) <= half && std::fabs(dy) <= half;
    case SynthShape::Diamond:
      return std::fabs(dx) + std::fabs(dy) <= half;
  }
  return false;
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

const Triplet kRed{0.6f, 0.08f, 0.08f};
const Triplet kBlue{0.08f, 0.16f, 0.6f};
const Triplet kYellow{0.62f, 0.55f, 0.08f};
const Triplet kBlack{0.08f, 0.08f, 0.08f};

}  // namespace

SynthItem draw_sign(const SynthSpec& spec) {
  if (spec.width < 1 || spec.height < 1) throw ContractViolation("synthetic image needs a positive size");
  SynthItem item;
  item.image = ImageBuffer(spec.width, spec.height);
  item.truth = Mask(spec.width, spec.height);
  std::mt19937_64 rng(spec.noise_seed);
  std::normal_distribution<double> noise(0.0, spec.noise > 0 ? spec.noise : 1.0);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const double ramp = spec.width > 1 ? spec.gradient * (2.0 * x / (spec.width - 1) - 1.0) : 0.0;
      const double n = spec.noise > 0 ? noise(rng) : 0.0;
      Triplet px;
      for (int c = 0; c < 3; ++c) px[c] = clamp01(spec.background[c] + ramp + n);
      if (inside(spec.shape, x - spec.cx, y - spec.cy, spec.half)) {
        px = spec.color;
        item.truth.set(x, y, true);
      }
      item.image.set_pixel(x, y, px);
    }
  }
  item.box = item.truth.bounding_box();
  return item;
}

const std::vector<std::string>& toy_class_names() {
  static const std::vector<std::string> names{"red-disk", "blue-square", "yellow-diamond"};
  return names;
}

SynthSpec toy_exemplar_spec(int label, int size) {
  SynthSpec s;
  s.width = s.height = size;
  s.cx = s.cy = (size - 1) / 2.0;
  const double scale = size / 32.0;
  switch (label) {
    case 0:
      s.shape = SynthShape::Disk;
      s.color = kRed;
      s.half = 11 * scale;
      break;
    case 1:
      s.shape = SynthShape::Square;
      s.color = kBlue;
      s.half = 10 * scale;
      break;
    case 2:
      s.shape = SynthShape::Diamond;
      s.color = kYellow;
      s.half = 14 * scale;
      break;
    default:
      throw ContractViolation("toy label must be 0, 1 or 2");
  }
  return s;
}

ToyClassifierWeights toy_weights(int size, double temperature) {
  std::vector<ImageBuffer> images;
  for (int label = 0; label < 3; ++label) images.push_back(draw_sign(toy_exemplar_spec(label, size)).image);
  return ToyClassifierWeights::from_images(toy_class_names(), images, size, temperature);
}

std::vector<SynthItem> toy_corpus(std::size_t n, std::uint64_t seed, int size) {
  std::vector<SynthItem> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int label = static_cast<int>(i % 3);
    SynthSpec s = toy_exemplar_spec(label, size);
    const double scale = size / 32.0;
    s.cx += (u(rng) - 0.5) * 3 * scale;
    s.cy += (u(rng) - 0.5) * 3 * scale;
    s.half *= 0.88 + 0.12 * u(rng);
    const double shade = 0.9 + 0.1 * u(rng);
    for (auto& c : s.color) c = clamp01(c * shade);
    const float bg = static_cast<float>(0.42 + 0.16 * u(rng));
    s.background = {bg, bg, bg};
    out.push_back(draw_sign(s));
    out.back().label = label;
  }
  return out;
}

std::vector<SynthItem> localization_corpus(std::size_t n, std::uint64_t seed, int size) {
  std::vector<SynthItem> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::mt19937_64 rng(derive_seed(seed, i));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SynthSpec s;
    s.width = s.height = size;
    s.shape = u(rng) < 0.5 ? SynthShape::Disk : SynthShape::Square;
    const int color = static_cast<int>(i % 4);
    s.color = color == 0 ? kRed : color == 1 ? kBlue : color == 2 ? kYellow : kBlack;
    const int style = static_cast<int>((i / 4) % 3);
    const double level = color == 3 ? 0.55 + 0.3 * u(rng) : 0.2 + 0.6 * u(rng);
    if (style == 1) {
      // Green tint: hue outside every palette box.
      s.background = {clamp01(level * 0.8), clamp01(level), clamp01(level * 0.85)};
    } else {
      s.background = {static_cast<float>(level), static_cast<float>(level), static_cast<float>(level)};
    }
    if (style == 2) s.gradient = 0.1;
    s.noise = 0.01;
    s.noise_seed = derive_seed(seed ^ 0x5bd1e995u, i);
    s.half = size * (0.15 + 0.15 * u(rng));
    const double margin = s.half + 2;
    s.cx = margin + (size - 1 - 2 * margin) * u(rng);
    s.cy = margin + (size - 1 - 2 * margin) * u(rng);
    SynthItem item = draw_sign(s);
    item.label = color;
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace itpatch
