// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "itpatch/image.hpp"
#include "itpatch/localization.hpp"
#include "json.hpp"

namespace itpatch {

enum class ShapeKind { Circle, Line, Curve };

const char* to_string(ShapeKind kind);
ShapeKind parse_shape_kind(const std::string& name);

using Point = std::array<double, 2>;

// One ink primitive. Coordinates are pixel indices: pixel (x, y) is covered
// when its index lies strictly closer than `radius` to the geometry.
struct ShapeParams {
  ShapeKind kind = ShapeKind::Circle;
  // Circle: {center}; Line: {p0, p1}; Curve: {p0, control, p2}.
  std::vector<Point> points{{0.0, 0.0}};
  // Circle radius, or stroke half-width for lines and curves.
  double radius = 0;
  std::array<double, 3> color{255, 255, 255};  // 0..255
  double alpha = 0.8;

  static ShapeParams circle(double x, double y, double r, std::array<double, 3> color,
                            double alpha);
  static ShapeParams line(Point a, Point b, double half_width, std::array<double, 3> color,
                          double alpha);
  static ShapeParams curve(Point a, Point control, Point b, double half_width,
                           std::array<double, 3> color, double alpha);

  static std::size_t point_count(ShapeKind kind);

  // Throws ContractViolation on bad counts or out-of-range values.
  void validate() const;
  bool covers(int x, int y) const;
  Mask support(int width, int height) const;
  // pi r^2, or stroke length x 2 half-width.
  double geometric_area() const;
  // Arc length of the stroke centerline (0 for circles).
  double stroke_length() const;

  bool operator==(const ShapeParams&) const = default;
};

struct PatchParams {
  std::vector<ShapeParams> shapes;
  double l1 = 1.05;
  double l2 = 1.35;

  void validate(bool triggered) const;
  bool operator==(const PatchParams&) const = default;
};

struct RenderMode {
  bool triggered = true;
  double residual_alpha = 0;

  static RenderMode Triggered() { return {true, 0.0}; }
  static RenderMode Untriggered(double residual_alpha) { return {false, residual_alpha}; }
};

// out = in (1 - alpha) + alpha gamma over the shape support (optionally clipped).
ImageBuffer blend_shape(const ImageBuffer& img, const ShapeParams& shape,
                        const Mask* clip = nullptr);
// blend_shape applied left to right.
ImageBuffer compose(const ImageBuffer& img, const std::vector<ShapeParams>& shapes,
                    const Mask* clip = nullptr);

// Scales LAB L by l2 on flu_mask, by l1 on region \ flu_mask, leaves the rest.
ImageBuffer apply_luminance(const ImageBuffer& img, const Mask& region, const Mask& flu_mask,
                            double l1, double l2);

struct Rendered {
  ImageBuffer image;
  Mask flu_mask;
};

// Throws ShapeOutsideRegion when a shape with non-empty support misses the
// region entirely.
Rendered render(const ImageBuffer& img, const SignRegion& region, const PatchParams& patch,
                const RenderMode& mode);

void to_json(nlohmann::json& j, const ShapeParams& s);
void from_json(const nlohmann::json& j, ShapeParams& s);
void to_json(nlohmann::json& j, const PatchParams& p);
void from_json(const nlohmann::json& j, PatchParams& p);

}  // namespace itpatch
