// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>

#include "itpatch/error.hpp"
#include "itpatch/fluorescence.hpp"

namespace itpatch {

namespace {

constexpr int kCurveSegments = 32;

Point bezier(const std::vector<Point>& p, double t) {
  const double u = 1 - t;
  return {u * u * p[0][0] + 2 * u * t * p[1][0] + t * t * p[2][0],
          u * u * p[0][1] + 2 * u * t * p[1][1] + t * t * p[2][1]};
}

// Centerline as a polyline (a single point for circles).
std::vector<Point> centerline(const ShapeParams& s) {
  switch (s.kind) {
    case ShapeKind::Circle:
      return {s.points[0]};
    case ShapeKind::Line:
      return {s.points[0], s.points[1]};
    case ShapeKind::Curve: {
      std::vector<Point> out;
      out.reserve(kCurveSegments + 1);
      for (int i = 0; i <= kCurveSegments; ++i) out.push_back(bezier(s.points, double(i) / kCurveSegments));
      return out;
    }
  }
  return {};
}

double segment_distance2(Point p, Point a, Point b) {
  const double vx = b[0] - a[0], vy = b[1] - a[1];
  const double wx = p[0] - a[0], wy = p[1] - a[1];
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? (wx * vx + wy * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = wx - t * vx, dy = wy - t * vy;
  return dx * dx + dy * dy;
}

double polyline_distance2(Point p, const std::vector<Point>& line) {
  if (line.size() == 1) {
    const double dx = p[0] - line[0][0], dy = p[1] - line[0][1];
    return dx * dx + dy * dy;
  }
  double best = INFINITY;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    best = std::min(best, segment_distance2(p, line[i], line[i + 1]));
  }
  return best;
}

}  // namespace

const char* to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Circle:
      return "circle";
    case ShapeKind::Line:
      return "line";
    case ShapeKind::Curve:
      return "curve";
  }
  return "?";
}

ShapeKind parse_shape_kind(const std::string& name) {
  if (name == "circle") return ShapeKind::Circle;
  if (name == "line") return ShapeKind::Line;
  if (name == "curve") return ShapeKind::Curve;
  throw ConfigError("unknown shape kind: " + name);
}

ShapeParams ShapeParams::circle(double x, double y, double r, std::array<double, 3> color,
                                double alpha) {
  return {ShapeKind::Circle, {{x, y}}, r, color, alpha};
}

ShapeParams ShapeParams::line(Point a, Point b, double half_width, std::array<double, 3> color,
                              double alpha) {
  return {ShapeKind::Line, {a, b}, half_width, color, alpha};
}

ShapeParams ShapeParams::curve(Point a, Point control, Point b, double half_width,
                               std::array<double, 3> color, double alpha) {
  return {ShapeKind::Curve, {a, control, b}, half_width, color, alpha};
}

std::size_t ShapeParams::point_count(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Circle:
      return 1;
    case ShapeKind::Line:
      return 2;
    case ShapeKind::Curve:
      return 3;
  }
  return 0;
}

void ShapeParams::validate() const {
  if (points.size() != point_count(kind)) {
    throw ContractViolation(std::string(to_string(kind)) + " needs " +
                            std::to_string(point_count(kind)) + " points");
  }
  for (const auto& p : points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw ContractViolation("non-finite shape point");
  }
  if (!(radius >= 0) || !std::isfinite(radius)) throw ContractViolation("shape radius must be >= 0");
  for (double c : color) {
    if (!(c >= 0 && c <= 255)) throw ContractViolation("shape color must lie in [0, 255]");
  }
  if (!(alpha >= 0 && alpha <= 1)) throw ContractViolation("shape alpha must lie in [0, 1]");
}

bool ShapeParams::covers(int x, int y) const {
  if (radius <= 0) return false;
  return polyline_distance2({double(x), double(y)}, centerline(*this)) < radius * radius;
}

Mask ShapeParams::support(int width, int height) const {
  Mask m(width, height);
  if (radius <= 0) return m;
  const auto line = centerline(*this);
  double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
  for (const auto& p : line) {
    x0 = std::min(x0, p[0]);
    y0 = std::min(y0, p[1]);
    x1 = std::max(x1, p[0]);
    y1 = std::max(y1, p[1]);
  }
  const int xa = std::max(0, static_cast<int>(std::floor(x0 - radius)));
  const int ya = std::max(0, static_cast<int>(std::floor(y0 - radius)));
  const int xb = std::min(width - 1, static_cast<int>(std::ceil(x1 + radius)));
  const int yb = std::min(height - 1, static_cast<int>(std::ceil(y1 + radius)));
  const double r2 = radius * radius;
  for (int y = ya; y <= yb; ++y) {
    for (int x = xa; x <= xb; ++x) {
      if (polyline_distance2({double(x), double(y)}, line) < r2) m.set(x, y, true);
    }
  }
  return m;
}

double ShapeParams::stroke_length() const {
  const auto line = centerline(*this);
  double len = 0;
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    len += std::hypot(line[i + 1][0] - line[i][0], line[i + 1][1] - line[i][1]);
  }
  return len;
}

double ShapeParams::geometric_area() const {
  if (kind == ShapeKind::Circle) return std::numbers::pi * radius * radius;
  return stroke_length() * 2 * radius;
}

void PatchParams::validate(bool triggered) const {
  if (shapes.empty()) throw ContractViolation("patch needs at least one shape");
  for (const auto& s : shapes) s.validate();
  if (!(l1 > 0) || !(l2 > 0)) throw ContractViolation("luminance gains must be positive");
  if (triggered && !(l2 > l1 && l1 >= 1)) {
    throw ContractViolation("triggered rendering needs l2 > l1 >= 1");
  }
}

void to_json(nlohmann::json& j, const ShapeParams& s) {
  j = nlohmann::json::object();
  j["kind"] = to_string(s.kind);
  if (s.kind == ShapeKind::Circle) {
    j["center"] = s.points[0];
  } else {
    j["points"] = s.points;
  }
  j["radius"] = s.radius;
  j["color"] = s.color;
  j["alpha"] = s.alpha;
}

void from_json(const nlohmann::json& j, ShapeParams& s) {
  try {
    s.kind = parse_shape_kind(j.value("kind", std::string("circle")));
    if (s.kind == ShapeKind::Circle) {
      s.points = {j.at("center").get<Point>()};
    } else {
      s.points = j.at("points").get<std::vector<Point>>();
    }
    s.radius = j.at("radius").get<double>();
    s.color = j.at("color").get<std::array<double, 3>>();
    s.alpha = j.at("alpha").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("shape: ") + e.what());
  }
  s.validate();
}

void to_json(nlohmann::json& j, const PatchParams& p) {
  j = nlohmann::json::object();
  j["shapes"] = p.shapes;
  j["l1"] = p.l1;
  j["l2"] = p.l2;
}

void from_json(const nlohmann::json& j, PatchParams& p) {
  try {
    p.shapes = j.at("shapes").get<std::vector<ShapeParams>>();
    p.l1 = j.value("l1", 1.05);
    p.l2 = j.value("l2", 1.35);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("patch: ") + e.what());
  }
}

}  // namespace itpatch
