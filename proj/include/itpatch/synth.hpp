// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "itpatch/color.hpp"
#include "itpatch/image.hpp"
#include "itpatch/oracle.hpp"

namespace itpatch {

enum class SynthShape { Disk, Square, Diamond };

struct SynthSpec {
  int width = 32;
  int height = 32;
  SynthShape shape = SynthShape::Disk;
  Triplet color{0.6f, 0.08f, 0.08f};
  Triplet background{0.5f, 0.5f, 0.5f};
  // Horizontal background ramp: left edge -gradient, right edge +gradient.
  double gradient = 0;
  // Per-pixel background noise std (seeded by noise_seed).
  double noise = 0;
  std::uint64_t noise_seed = 0;
  double cx = 15.5;
  double cy = 15.5;
  // Radius, half side or half diagonal.
  double half = 11;
};

struct SynthItem {
  ImageBuffer image;
  // Pixels whose centre lies inside the shape.
  Mask truth;
  BBox box;
  int label = -1;
};

SynthItem draw_sign(const SynthSpec& spec);

// The three toy classes: red disk, blue square, yellow diamond.
const std::vector<std::string>& toy_class_names();
SynthSpec toy_exemplar_spec(int label, int size = 32);
ToyClassifierWeights toy_weights(int size = 32, double temperature = 0.05);

// Jittered toy signs (position, scale, shade, background); labels cycle.
std::vector<SynthItem> toy_corpus(std::size_t n, std::uint64_t seed, int size = 32);

// Disks and squares in palette colors over gray, tinted and ramped
// backgrounds.
std::vector<SynthItem> localization_corpus(std::size_t n, std::uint64_t seed, int size = 64);

}  // namespace itpatch
