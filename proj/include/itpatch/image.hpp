// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace itpatch {

// RGB is stored in [0,1]. HSV follows the 8-bit convention (hue 0..179,
// saturation and value 0..255). LAB is CIELAB (L 0..100, a/b -128..127).
enum class ColorSpace { RGB, HSV, LAB };

const char* to_string(ColorSpace space);

// Interleaved three-channel raster, row-major.
class ImageBuffer {
 public:
  static constexpr int kChannels = 3;

  ImageBuffer() = default;
  ImageBuffer(int width, int height, ColorSpace space = ColorSpace::RGB,
              float fill = 0.0f);
  ImageBuffer(int width, int height, ColorSpace space, std::vector<float> data);

  static ImageBuffer filled(int width, int height, std::array<float, 3> rgb);

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return kChannels; }
  ColorSpace space() const { return space_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_);
  }
  bool empty() const { return data_.empty(); }

  float& at(int x, int y, int c) { return data_[index(x, y, c)]; }
  float at(int x, int y, int c) const { return data_[index(x, y, c)]; }

  std::array<float, 3> pixel(int x, int y) const {
    const std::size_t i = index(x, y, 0);
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set_pixel(int x, int y, std::array<float, 3> v) {
    const std::size_t i = index(x, y, 0);
    data_[i] = v[0];
    data_[i + 1] = v[1];
    data_[i + 2] = v[2];
  }

  std::span<float> row(int y) {
    return {data_.data() + index(0, y, 0), static_cast<std::size_t>(width_) * kChannels};
  }
  std::span<const float> row(int y) const {
    return {data_.data() + index(0, y, 0), static_cast<std::size_t>(width_) * kChannels};
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  // Throws ContractViolation unless the tag equals `expected`.
  void require_space(ColorSpace expected, const char* what) const;

  bool operator==(const ImageBuffer& other) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * kChannels + static_cast<std::size_t>(c);
  }

  int width_ = 0;
  int height_ = 0;
  ColorSpace space_ = ColorSpace::RGB;
  std::vector<float> data_;
};

// Axis-aligned box in pixel coordinates. Degenerate boxes have zero area.
struct BBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const {
    return width() > 0 && height() > 0 ? width() * height() : 0.0;
  }
  bool valid() const { return x_min <= x_max && y_min <= y_max; }

  bool operator==(const BBox&) const = default;
};

// Binary grid with values in {0,1}.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, std::uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  std::uint8_t operator()(int x, int y) const {
    return bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(x)];
  }
  void set(int x, int y, bool on) {
    bits_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
          static_cast<std::size_t>(x)] = on ? 1 : 0;
  }
  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  // Inside the grid and set.
  bool test(int x, int y) const { return contains(x, y) && (*this)(x, y) != 0; }

  std::span<std::uint8_t> bits() { return bits_; }
  std::span<const std::uint8_t> bits() const { return bits_; }

  std::size_t count() const;
  bool any() const { return count() > 0; }
  // Tight pixel-index box; x_max/y_max are inclusive pixel indices. All zeros
  // when the mask is empty.
  BBox bounding_box() const;

  Mask operator|(const Mask& other) const;
  Mask operator&(const Mask& other) const;
  // Pixels set here and not in `other`.
  Mask minus(const Mask& other) const;
  bool subset_of(const Mask& other) const;

  bool operator==(const Mask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Intersection-over-union of two masks; 0 when both are empty.
double mask_iou(const Mask& a, const Mask& b);

// Bilinear resize on pixel centers.
ImageBuffer resize(const ImageBuffer& img, int width, int height);

// Copies the integer pixel box [x0,x1) x [y0,y1), clamped to the image.
ImageBuffer crop(const ImageBuffer& img, int x0, int y0, int x1, int y1);

// 8-bit quantization used for file and wire I/O: round(v*255), clamped.
std::uint8_t to_byte(float v);
inline float from_byte(std::uint8_t b) { return static_cast<float>(b) / 255.0f; }

}  // namespace itpatch
