#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "qunet/core/grid.hpp"

namespace qunet {

using Rgb = std::array<std::uint8_t, 3>;
using RgbImage = Grid<Rgb>;

/// Reads any PNG as 8-bit grayscale (color and alpha are folded/stripped).
Grid<std::uint8_t> read_png_gray(const std::filesystem::path& path);
void write_png_gray(const std::filesystem::path& path, const Grid<std::uint8_t>& pixels);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& pixels);
RgbImage read_png_rgb(const std::filesystem::path& path);

/// [0,1] intensities to 8-bit with rounding and clamping.
Grid<std::uint8_t> to_u8(const Image& image);
Image from_u8(const Grid<std::uint8_t>& pixels);

}  // namespace qunet
