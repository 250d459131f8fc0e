#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace oscos {

/// Encodes an 8-bit grayscale raster (row-major, width*height bytes) as PNG.
std::vector<std::uint8_t> encode_png_gray8(std::span<const std::uint8_t> pixels, std::size_t width, std::size_t height);

} // namespace oscos
