// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "itpatch/image.hpp"
#include "itpatch/warp.hpp"
#include "json.hpp"

namespace itpatch {

// Closed interval with an on/off switch. A disabled range always yields the
// stage's neutral value.
struct Range {
  double lo = 0;
  double hi = 0;
  bool enabled = true;

  bool contains(double v) const { return v >= lo && v <= hi; }
  bool subset_of(const Range& other) const { return lo >= other.lo && hi <= other.hi; }
  bool operator==(const Range&) const = default;
};

struct TransformSpec {
  Range brightness_l{0, 50};
  Range h_view_deg{-30, 60};
  Range v_view_deg{0, 60};
  // Lower end excludes 0 in the published range; 1 m is the closest we sample.
  Range distance_m{1, 20};
  Range rotation_deg{-10, 10};
  Range blur_len_px{0, 9};
  Range blur_angle_deg{0, 180};
  Range residual_alpha{0, 0.1};

  double sign_size_m = 0.6;
  // Pixels per unit of sign_size / distance.
  double focal_scale = 320;

  bool use_backgrounds = false;
  std::vector<std::string> background_paths;
  std::vector<ImageBuffer> backgrounds;
  // Fill for uncovered pixels when no background is used.
  Triplet fill{0.5f, 0.5f, 0.5f};
  // Allows ranges wider than the published defaults.
  bool allow_widen = false;

  // Everything disabled: sample() then always yields the identity.
  static TransformSpec identity();

  // Throws ConfigError on inverted or (unless allowed) widened ranges.
  void validate() const;
};

struct TransformSample {
  double brightness_l = 0;
  double h_view_deg = 0;
  double v_view_deg = 0;
  double distance_m = 0;  // 0 = distance stage off
  double rotation_deg = 0;
  int blur_len_px = 0;
  double blur_angle_deg = 0;
  double residual_alpha = 0;
  int background_index = -1;  // -1 = no background
  double place_u = 0.5;
  double place_v = 0.5;
  std::uint64_t seed = 0;

  bool operator==(const TransformSample&) const = default;
};

// Independent uniform draws; the same (spec, seed) always gives the same sample.
TransformSample sample(const TransformSpec& spec, std::uint64_t seed);
// n samples from seeds derived from `seed`.
std::vector<TransformSample> sample_many(const TransformSpec& spec, std::uint64_t seed,
                                         std::size_t n);

// Stream of well-mixed 64-bit seeds (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

struct Transformed {
  ImageBuffer image;
  Mask mask;
  Homography geometry;
};

// Scale (distance), perspective (view angles), in-plane rotation and
// placement as one homography about the sign centre, then the L offset inside
// the sign, then linear motion blur over the frame.
Transformed apply(const ImageBuffer& img, const Mask& sign_mask, const TransformSample& s,
                  const TransformSpec& spec);

// Box blur along a line of `length` pixels at `angle_deg`.
ImageBuffer motion_blur(const ImageBuffer& img, int length, double angle_deg);

void to_json(nlohmann::json& j, const Range& r);
void from_json(const nlohmann::json& j, Range& r);
void to_json(nlohmann::json& j, const TransformSample& s);
void from_json(const nlohmann::json& j, TransformSample& s);

}  // namespace itpatch
