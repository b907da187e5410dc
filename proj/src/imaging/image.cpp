// SPDX-License-Identifier: Apache-2.0

#include "itpatch/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "itpatch/error.hpp"

namespace itpatch {

const char* to_string(ColorSpace space) {
  switch (space) {
    case ColorSpace::RGB: return "RGB";
    case ColorSpace::HSV: return "HSV";
    case ColorSpace::LAB: return "LAB";
  }
  return "?";
}

ImageBuffer::ImageBuffer(int width, int height, ColorSpace space, float fill)
    : width_(width), height_(height), space_(space) {
  if (width < 0 || height < 0) throw ContractViolation("negative image size");
  data_.assign(pixel_count() * kChannels, fill);
}

ImageBuffer::ImageBuffer(int width, int height, ColorSpace space, std::vector<float> data)
    : width_(width), height_(height), space_(space), data_(std::move(data)) {
  if (width < 0 || height < 0) throw ContractViolation("negative image size");
  if (data_.size() != pixel_count() * kChannels) {
    throw ContractViolation("image data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(width) + "x" +
                            std::to_string(height) + "x3");
  }
}

ImageBuffer ImageBuffer::filled(int width, int height, std::array<float, 3> rgb) {
  ImageBuffer img(width, height, ColorSpace::RGB);
  for (std::size_t i = 0; i < img.data_.size(); i += kChannels) {
    img.data_[i] = rgb[0];
    img.data_[i + 1] = rgb[1];
    img.data_[i + 2] = rgb[2];
  }
  return img;
}

void ImageBuffer::require_space(ColorSpace expected, const char* what) const {
  if (space_ != expected) {
    throw ContractViolation(std::string(what) + " expects a " + to_string(expected) +
                            " image, got " + to_string(space_));
  }
}

Mask::Mask(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  if (width < 0 || height < 0) throw ContractViolation("negative mask size");
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height),
               fill ? 1 : 0);
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BBox Mask::bounding_box() const {
  int x0 = width_, y0 = height_, x1 = -1, y1 = -1;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if ((*this)(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
    }
  }
  if (x1 < 0) return {};
  return {double(x0), double(y0), double(x1), double(y1)};
}

namespace {

void require_same_shape(const Mask& a, const Mask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ContractViolation("mask shape mismatch");
  }
}

}  // namespace

Mask Mask::operator|(const Mask& other) const {
  require_same_shape(*this, other);
  Mask out(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] | other.bits_[i];
  return out;
}

Mask Mask::operator&(const Mask& other) const {
  require_same_shape(*this, other);
  Mask out(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] & other.bits_[i];
  return out;
}

Mask Mask::minus(const Mask& other) const {
  require_same_shape(*this, other);
  Mask out(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    out.bits_[i] = bits_[i] && !other.bits_[i] ? 1 : 0;
  }
  return out;
}

bool Mask::subset_of(const Mask& other) const {
  require_same_shape(*this, other);
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

double mask_iou(const Mask& a, const Mask& b) {
  require_same_shape(a, b);
  std::size_t inter = 0, uni = 0;
  const auto ab = a.bits();
  const auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    inter += (ab[i] & bb[i]);
    uni += (ab[i] | bb[i]);
  }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

ImageBuffer resize(const ImageBuffer& img, int width, int height) {
  if (width <= 0 || height <= 0) throw ContractViolation("resize to empty size");
  if (img.empty()) throw ContractViolation("resize of empty image");
  if (width == img.width() && height == img.height()) return img;
  ImageBuffer out(width, height, img.space());
  const double sx = double(img.width()) / width;
  const double sy = double(img.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(img.height() - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const float wy = static_cast<float>(fy - y0);
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(img.width() - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const float wx = static_cast<float>(fx - x0);
      for (int c = 0; c < 3; ++c) {
        const float top = img.at(x0, y0, c) * (1 - wx) + img.at(x1, y0, c) * wx;
        const float bot = img.at(x0, y1, c) * (1 - wx) + img.at(x1, y1, c) * wx;
        out.at(x, y, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

ImageBuffer crop(const ImageBuffer& img, int x0, int y0, int x1, int y1) {
  x0 = std::clamp(x0, 0, img.width());
  x1 = std::clamp(x1, 0, img.width());
  y0 = std::clamp(y0, 0, img.height());
  y1 = std::clamp(y1, 0, img.height());
  if (x1 <= x0 || y1 <= y0) throw ContractViolation("empty crop");
  ImageBuffer out(x1 - x0, y1 - y0, img.space());
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) out.set_pixel(x - x0, y - y0, img.pixel(x, y));
  }
  return out;
}

std::uint8_t to_byte(float v) {
  const float s = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f);
  return static_cast<std::uint8_t>(s);
}

}  // namespace itpatch
