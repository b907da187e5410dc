// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "itpatch/image.hpp"

namespace itpatch {

// Decodes any PNG to 8-bit RGB: palette and gray are expanded, alpha is
// dropped and 16-bit samples keep their high byte. Throws IoError when the
// file cannot be opened and DecodeError on malformed or truncated data.
ImageBuffer read_png(const std::filesystem::path& path);
ImageBuffer decode_png(std::span<const std::uint8_t> bytes);

void write_png(const ImageBuffer& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const ImageBuffer& img);

// 1-bit grayscale PNG.
void write_mask_png(const Mask& mask, const std::filesystem::path& path);
// Any PNG; a pixel is set when its first channel is nonzero.
Mask read_mask_png(const std::filesystem::path& path);

}  // namespace itpatch
