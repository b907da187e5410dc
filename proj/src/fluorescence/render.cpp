// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <vector>

#include "itpatch/color.hpp"
#include "itpatch/error.hpp"
#include "itpatch/fluorescence.hpp"
#include "itpatch/kernels.hpp"

namespace itpatch {

namespace {

void blend_in_place(ImageBuffer& img, const ShapeParams& shape, const Mask* clip) {
  if (shape.alpha <= 0) return;
  Mask support = shape.support(img.width(), img.height());
  if (clip) support = support & *clip;
  if (!support.any()) return;
  const BBox box = support.bounding_box();
  const int x0 = static_cast<int>(box.x_min), x1 = static_cast<int>(box.x_max);
  const std::size_t n = static_cast<std::size_t>(x1 - x0 + 1) * 3;
  std::vector<float> weight(n), target(n);
  const float a = static_cast<float>(shape.alpha);
  for (std::size_t i = 0; i < n; i += 3) {
    for (int c = 0; c < 3; ++c) target[i + static_cast<std::size_t>(c)] = static_cast<float>(shape.color[static_cast<std::size_t>(c)] / 255.0);
  }
  for (int y = static_cast<int>(box.y_min); y <= static_cast<int>(box.y_max); ++y) {
    for (int x = x0; x <= x1; ++x) {
      const float w = support(x, y) ? a : 0.0f;
      const std::size_t i = static_cast<std::size_t>(x - x0) * 3;
      weight[i] = weight[i + 1] = weight[i + 2] = w;
    }
    auto row = img.row(y).subspan(static_cast<std::size_t>(x0) * 3, n);
    kernels::blend_weighted(row, weight, target);
  }
}

}  // namespace

ImageBuffer blend_shape(const ImageBuffer& img, const ShapeParams& shape, const Mask* clip) {
  img.require_space(ColorSpace::RGB, "blend_shape");
  shape.validate();
  ImageBuffer out = img;
  blend_in_place(out, shape, clip);
  return out;
}

ImageBuffer compose(const ImageBuffer& img, const std::vector<ShapeParams>& shapes,
                    const Mask* clip) {
  img.require_space(ColorSpace::RGB, "compose");
  if (shapes.empty()) throw ContractViolation("compose needs at least one shape");
  ImageBuffer out = img;
  for (const auto& s : shapes) {
    s.validate();
    blend_in_place(out, s, clip);
  }
  return out;
}

ImageBuffer apply_luminance(const ImageBuffer& img, const Mask& region, const Mask& flu_mask,
                            double l1, double l2) {
  img.require_space(ColorSpace::RGB, "apply_luminance");
  if (region.width() != img.width() || region.height() != img.height() ||
      flu_mask.width() != img.width() || flu_mask.height() != img.height()) {
    throw ContractViolation("apply_luminance: mask size does not match the image");
  }
  if (!(l1 > 0) || !(l2 > 0)) throw ContractViolation("apply_luminance: gains must be positive");
  ImageBuffer out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double gain = 1.0;
      if (flu_mask(x, y)) {
        gain = l2;
      } else if (region(x, y)) {
        gain = l1;
      }
      if (gain == 1.0) continue;
      Triplet lab = rgb_to_lab(img.pixel(x, y));
      lab[0] = static_cast<float>(std::clamp(lab[0] * gain, 0.0, 100.0));
      out.set_pixel(x, y, lab_to_rgb(lab));
    }
  }
  return out;
}

Rendered render(const ImageBuffer& img, const SignRegion& region, const PatchParams& patch,
                const RenderMode& mode) {
  img.require_space(ColorSpace::RGB, "render");
  if (region.mask.width() != img.width() || region.mask.height() != img.height()) {
    throw ContractViolation("render: region size does not match the image");
  }
  patch.validate(mode.triggered);
  if (!mode.triggered && !(mode.residual_alpha >= 0 && mode.residual_alpha <= 0.1)) {
    throw ContractViolation("residual alpha must lie in [0, 0.1]");
  }

  Rendered r{img, Mask(img.width(), img.height())};
  for (const auto& s : patch.shapes) {
    const Mask support = s.support(img.width(), img.height());
    if (!support.any()) continue;
    const Mask clipped = support & region.mask;
    if (!clipped.any()) throw ShapeOutsideRegion("shape support does not touch the sign region");
    r.flu_mask = r.flu_mask | clipped;
  }

  if (mode.triggered) {
    r.image = compose(img, patch.shapes, &region.mask);
    r.image = apply_luminance(r.image, region.mask, r.flu_mask, patch.l1, patch.l2);
  } else {
    std::vector<ShapeParams> faint = patch.shapes;
    for (auto& s : faint) s.alpha = mode.residual_alpha;
    r.image = compose(img, faint, &region.mask);
  }
  return r;
}

}  // namespace itpatch
