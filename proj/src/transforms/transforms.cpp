// SPDX-License-Identifier: Apache-2.0

#include "itpatch/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "itpatch/color.hpp"
#include "itpatch/error.hpp"

namespace itpatch {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double draw(std::mt19937_64& rng, const Range& r, double neutral) {
  // Always consume one draw so enabling a stage never shifts the others.
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (!r.enabled) return neutral;
  return r.lo + (r.hi - r.lo) * u;
}

void check_range(const char* name, const Range& r, const Range& published, bool allow_widen) {
  if (!(r.lo <= r.hi)) throw ConfigError(std::string("transforms.") + name + ": lo exceeds hi");
  if (r.enabled && !allow_widen && !r.subset_of(published)) {
    throw ConfigError(std::string("transforms.") + name + " widens the default range");
  }
}

// Plane tilt seen by a pinhole camera with focal length f, in coordinates
// centred on the sign.
Homography perspective(double h_deg, double v_deg, double f) {
  const double ch = std::cos(h_deg * kDeg), sh = std::sin(h_deg * kDeg);
  const double cv = std::cos(v_deg * kDeg), sv = std::sin(v_deg * kDeg);
  // R = Ry(h) * Rx(v)
  const double r11 = ch, r12 = sh * sv;
  const double r21 = 0, r22 = cv;
  const double r31 = -sh, r32 = ch * sv;
  Homography p;
  p.m = {r11, r12, 0, r21, r22, 0, r31 / f, r32 / f, 1};
  return p;
}

}  // namespace

TransformSpec TransformSpec::identity() {
  TransformSpec s;
  for (Range* r : {&s.brightness_l, &s.h_view_deg, &s.v_view_deg, &s.distance_m, &s.rotation_deg,
                   &s.blur_len_px, &s.blur_angle_deg, &s.residual_alpha}) {
    r->enabled = false;
  }
  return s;
}

void TransformSpec::validate() const {
  const TransformSpec d;
  check_range("brightness_l", brightness_l, d.brightness_l, allow_widen);
  check_range("h_view_deg", h_view_deg, d.h_view_deg, allow_widen);
  check_range("v_view_deg", v_view_deg, d.v_view_deg, allow_widen);
  check_range("distance_m", distance_m, {0, 20}, allow_widen);
  check_range("rotation_deg", rotation_deg, d.rotation_deg, allow_widen);
  check_range("blur_len_px", blur_len_px, d.blur_len_px, allow_widen);
  check_range("blur_angle_deg", blur_angle_deg, d.blur_angle_deg, allow_widen);
  check_range("residual_alpha", residual_alpha, d.residual_alpha, allow_widen);
  if (distance_m.enabled && !(distance_m.lo > 0)) {
    throw ConfigError("transforms.distance_m must stay above 0");
  }
  if (blur_len_px.lo < 0) throw ConfigError("transforms.blur_len_px must be non-negative");
  if (!(sign_size_m > 0) || !(focal_scale > 0)) {
    throw ConfigError("transforms: sign_size_m and focal_scale must be positive");
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

TransformSample sample(const TransformSpec& spec, std::uint64_t seed) {
  if (spec.use_backgrounds && spec.backgrounds.empty()) {
    throw ConfigError("transforms: backgrounds enabled but none loaded");
  }
  std::mt19937_64 rng(seed);
  TransformSample s;
  s.seed = seed;
  s.brightness_l = draw(rng, spec.brightness_l, 0);
  s.h_view_deg = draw(rng, spec.h_view_deg, 0);
  s.v_view_deg = draw(rng, spec.v_view_deg, 0);
  s.distance_m = draw(rng, spec.distance_m, 0);
  s.rotation_deg = draw(rng, spec.rotation_deg, 0);
  {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (spec.blur_len_px.enabled) {
      const int lo = static_cast<int>(std::ceil(spec.blur_len_px.lo));
      const int hi = static_cast<int>(std::floor(spec.blur_len_px.hi));
      s.blur_len_px = std::min(hi, lo + static_cast<int>(u * (hi - lo + 1)));
    }
  }
  s.blur_angle_deg = draw(rng, spec.blur_angle_deg, 0);
  if (spec.blur_angle_deg.enabled && s.blur_angle_deg >= spec.blur_angle_deg.hi &&
      spec.blur_angle_deg.hi > spec.blur_angle_deg.lo) {
    s.blur_angle_deg = spec.blur_angle_deg.lo;
  }
  s.residual_alpha = draw(rng, spec.residual_alpha, 0);
  const double bg = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  s.place_u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  s.place_v = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (spec.use_backgrounds) {
    const int n = static_cast<int>(spec.backgrounds.size());
    s.background_index = std::min(n - 1, static_cast<int>(bg * n));
  }
  return s;
}

std::vector<TransformSample> sample_many(const TransformSpec& spec, std::uint64_t seed,
                                         std::size_t n) {
  std::vector<TransformSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample(spec, derive_seed(seed, i)));
  return out;
}

ImageBuffer motion_blur(const ImageBuffer& img, int length, double angle_deg) {
  if (length <= 1) return img;
  const double dx = std::cos(angle_deg * kDeg), dy = std::sin(angle_deg * kDeg);
  const int w = img.width(), h = img.height();
  ImageBuffer out(w, h, img.space());
  const double half = (length - 1) / 2.0;
  auto sample_at = [&](double x, double y, int c) {
    x = std::clamp(x, 0.0, double(w - 1));
    y = std::clamp(y, 0.0, double(h - 1));
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0, fy = y - y0;
    const double top = img.at(x0, y0, c) * (1 - fx) + img.at(x1, y0, c) * fx;
    const double bot = img.at(x0, y1, c) * (1 - fx) + img.at(x1, y1, c) * fx;
    return top * (1 - fy) + bot * fy;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int k = 0; k < length; ++k) {
          const double t = k - half;
          acc += sample_at(x + t * dx, y + t * dy, c);
        }
        out.at(x, y, c) = static_cast<float>(acc / length);
      }
    }
  }
  return out;
}

Transformed apply(const ImageBuffer& img, const Mask& sign_mask, const TransformSample& s,
                  const TransformSpec& spec) {
  img.require_space(ColorSpace::RGB, "transforms::apply");
  if (sign_mask.width() != img.width() || sign_mask.height() != img.height()) {
    throw ContractViolation("transforms::apply: mask size does not match the image");
  }
  double cx = (img.width() - 1) / 2.0, cy = (img.height() - 1) / 2.0;
  double sign_w = img.width();
  if (sign_mask.any()) {
    const BBox b = sign_mask.bounding_box();
    cx = (b.x_min + b.x_max) / 2.0;
    cy = (b.y_min + b.y_max) / 2.0;
    sign_w = b.width() + 1;
  }

  Homography local = Homography::translation(-cx, -cy);
  if (s.distance_m > 0) {
    const double k = spec.focal_scale * spec.sign_size_m / s.distance_m / sign_w;
    local = Homography::scaling(k, k) * local;
  }
  if (s.h_view_deg != 0 || s.v_view_deg != 0) {
    local = perspective(s.h_view_deg, s.v_view_deg, img.width()) * local;
  }
  if (s.rotation_deg != 0) local = Homography::rotation(s.rotation_deg) * local;

  Transformed out;
  const bool with_bg = s.background_index >= 0;
  if (!with_bg) {
    out.geometry = Homography::translation(cx, cy) * local;
    out.image = warp(img, out.geometry, img.width(), img.height(), spec.fill);
    out.mask = warp(sign_mask, out.geometry, img.width(), img.height());
  } else {
    if (static_cast<std::size_t>(s.background_index) >= spec.backgrounds.size()) {
      throw ContractViolation("transforms::apply: background index out of range");
    }
    const ImageBuffer& bg = spec.backgrounds[static_cast<std::size_t>(s.background_index)];
    bg.require_space(ColorSpace::RGB, "transforms::apply background");
    const BBox b = sign_mask.any() ? sign_mask.bounding_box()
                                   : BBox{0, 0, double(img.width() - 1), double(img.height() - 1)};
    double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
    for (const auto& [px, py] : {std::pair{b.x_min, b.y_min}, std::pair{b.x_max, b.y_min},
                                 std::pair{b.x_min, b.y_max}, std::pair{b.x_max, b.y_max}}) {
      const auto [qx, qy] = local.apply(px, py);
      x0 = std::min(x0, qx);
      y0 = std::min(y0, qy);
      x1 = std::max(x1, qx);
      y1 = std::max(y1, qy);
    }
    const double span_x = bg.width() - 1 - (x1 - x0);
    const double span_y = bg.height() - 1 - (y1 - y0);
    if (span_x < 0 || span_y < 0) {
      throw ContractViolation("transforms::apply: background smaller than composited sign");
    }
    const double tx = std::round(-x0 + s.place_u * span_x);
    const double ty = std::round(-y0 + s.place_v * span_y);
    out.geometry = Homography::translation(tx, ty) * local;
    const ImageBuffer sign = warp(img, out.geometry, bg.width(), bg.height(), spec.fill);
    out.mask = warp(sign_mask, out.geometry, bg.width(), bg.height());
    out.image = bg;
    for (int y = 0; y < bg.height(); ++y) {
      for (int x = 0; x < bg.width(); ++x) {
        if (out.mask(x, y)) out.image.set_pixel(x, y, sign.pixel(x, y));
      }
    }
  }

  if (s.brightness_l != 0) {
    for (int y = 0; y < out.image.height(); ++y) {
      for (int x = 0; x < out.image.width(); ++x) {
        if (!out.mask(x, y)) continue;
        Triplet lab = rgb_to_lab(out.image.pixel(x, y));
        lab[0] = static_cast<float>(std::clamp(lab[0] + s.brightness_l, 0.0, 100.0));
        out.image.set_pixel(x, y, lab_to_rgb(lab));
      }
    }
  }
  if (s.blur_len_px > 1) out.image = motion_blur(out.image, s.blur_len_px, s.blur_angle_deg);
  return out;
}

void to_json(nlohmann::json& j, const Range& r) {
  j = {{"enabled", r.enabled}, {"range", {r.lo, r.hi}}};
}

void from_json(const nlohmann::json& j, Range& r) {
  try {
    for (const auto& [key, _] : j.items()) {
      if (key != "enabled" && key != "range") throw ConfigError("unknown range key: " + key);
    }
    r.enabled = j.value("enabled", true);
    const auto pair = j.at("range").get<std::array<double, 2>>();
    r.lo = pair[0];
    r.hi = pair[1];
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("range: ") + e.what());
  }
}

void to_json(nlohmann::json& j, const TransformSample& s) {
  j = {{"brightness_l", s.brightness_l},     {"h_view_deg", s.h_view_deg},
       {"v_view_deg", s.v_view_deg},         {"distance_m", s.distance_m},
       {"rotation_deg", s.rotation_deg},     {"blur_len_px", s.blur_len_px},
       {"blur_angle_deg", s.blur_angle_deg}, {"residual_alpha", s.residual_alpha},
       {"background_index", s.background_index}, {"place_u", s.place_u},
       {"place_v", s.place_v},               {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, TransformSample& s) {
  try {
    s.brightness_l = j.at("brightness_l").get<double>();
    s.h_view_deg = j.at("h_view_deg").get<double>();
    s.v_view_deg = j.at("v_view_deg").get<double>();
    s.distance_m = j.at("distance_m").get<double>();
    s.rotation_deg = j.at("rotation_deg").get<double>();
    s.blur_len_px = j.at("blur_len_px").get<int>();
    s.blur_angle_deg = j.at("blur_angle_deg").get<double>();
    s.residual_alpha = j.at("residual_alpha").get<double>();
    s.background_index = j.at("background_index").get<int>();
    s.place_u = j.at("place_u").get<double>();
    s.place_v = j.at("place_v").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("transform sample: ") + e.what());
  }
}

}  // namespace itpatch
