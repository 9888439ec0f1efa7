#pragma once

#include <filesystem>

#include "veinqa/image.hpp"

namespace veinqa {

/// Decodes any PNG into 8-bit samples with 1 (gray) or 3 (RGB) channels;
/// alpha is dropped, palettes expanded, 16-bit reduced.
Raster8 read_png(const std::filesystem::path& path);

/// Writes an 8-bit gray or RGB PNG.
void write_png(const std::filesystem::path& path, const Raster8& raster);

/// Quantizes to 8 bits with round-to-nearest.
Raster8 to_raster8(const GrayImage& image);

GrayImage load_gray_image(const std::filesystem::path& path);
void save_gray_image(const std::filesystem::path& path, const GrayImage& image);

}  // namespace veinqa
