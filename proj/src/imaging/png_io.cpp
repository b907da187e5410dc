// SPDX-License-Identifier: Apache-2.0

#include "itpatch/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

#include "itpatch/error.hpp"

// setjmp-based libpng error handling; locals touched after setjmp are not
// read on the error path.
#pragma GCC diagnostic ignored "-Wclobbered"

namespace itpatch {

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t offset = 0;
};

void read_from_cursor(png_structp png, png_bytep out, png_size_t length) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + length > cursor->bytes.size()) {
    png_error(png, "unexpected end of PNG data");
  }
  std::memcpy(out, cursor->bytes.data() + cursor->offset, length);
  cursor->offset += length;
}

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

void silence_warning(png_structp, png_const_charp) {}

[[noreturn]] void jump_on_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

// Writes rows of the given format; `rows` holds packed scanlines.
std::vector<std::uint8_t> encode_rows(int width, int height, int bit_depth, int color_type,
                                      const std::vector<std::vector<std::uint8_t>>& rows) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, jump_on_error,
                                            silence_warning);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<std::uint8_t> out;
  std::vector<png_const_bytep> row_ptrs(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) row_ptrs[i] = rows[i].data();

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed");
  }
  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_rows(png, const_cast<png_bytepp>(row_ptrs.data()),
                 static_cast<png_uint_32>(row_ptrs.size()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

ImageBuffer decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw DecodeError("not a PNG stream");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, jump_on_error,
                                           silence_warning);
  if (!png) throw DecodeError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DecodeError("png_create_info_struct failed");
  }

  ReadCursor cursor{bytes, 0};
  std::vector<std::uint8_t> pixels;
  std::vector<png_bytep> rows;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("malformed or truncated PNG");
  }
  png_set_read_fn(png, &cursor, read_from_cursor);
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (png_get_channels(png, info) != 3 || rowbytes != static_cast<std::size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DecodeError("unsupported PNG layout");
  }
  pixels.resize(rowbytes * static_cast<std::size_t>(height));
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = pixels.data() + rowbytes * static_cast<std::size_t>(y);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<float> data(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) data[i] = from_byte(pixels[i]);
  return ImageBuffer(width, height, ColorSpace::RGB, std::move(data));
}

ImageBuffer read_png(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  return decode_png(bytes);
}

std::vector<std::uint8_t> encode_png(const ImageBuffer& img) {
  img.require_space(ColorSpace::RGB, "encode_png");
  if (img.empty()) throw ContractViolation("cannot encode an empty image");
  std::vector<std::vector<std::uint8_t>> rows(static_cast<std::size_t>(img.height()));
  for (int y = 0; y < img.height(); ++y) {
    auto& row = rows[static_cast<std::size_t>(y)];
    const auto src = img.row(y);
    row.resize(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) row[i] = to_byte(src[i]);
  }
  return encode_rows(img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, rows);
}

void write_png(const ImageBuffer& img, const std::filesystem::path& path) {
  spill(encode_png(img), path);
}

void write_mask_png(const Mask& mask, const std::filesystem::path& path) {
  if (mask.size() == 0) throw ContractViolation("cannot encode an empty mask");
  const std::size_t stride = (static_cast<std::size_t>(mask.width()) + 7) / 8;
  std::vector<std::vector<std::uint8_t>> rows(static_cast<std::size_t>(mask.height()),
                                              std::vector<std::uint8_t>(stride, 0));
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask(x, y)) {
        rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x / 8)] |=
            static_cast<std::uint8_t>(0x80u >> (x % 8));
      }
    }
  }
  spill(encode_rows(mask.width(), mask.height(), 1, PNG_COLOR_TYPE_GRAY, rows), path);
}

Mask read_mask_png(const std::filesystem::path& path) {
  const ImageBuffer img = read_png(path);
  Mask mask(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) mask.set(x, y, img.at(x, y, 0) > 0.0f);
  }
  return mask;
}

}  // namespace itpatch
