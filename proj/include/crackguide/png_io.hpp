#pragma once

#include <filesystem>

#include "crackguide/grid.hpp"

namespace crackguide::io {

/// 8-bit grayscale PNG.
void write_png(const Grid<std::uint8_t>& pixels, const std::filesystem::path& path);
Grid<std::uint8_t> read_png(const std::filesystem::path& path);

/// Intensities in [0,1] map to round(255·v). Lossless for generator output.
void write_image(const ImageGrid& image, const std::filesystem::path& path);
ImageGrid read_image(const std::filesystem::path& path);

/// Masks are stored as {0,255}; on read any nonzero pixel is set.
void write_mask(const MaskGrid& mask, const std::filesystem::path& path);
MaskGrid read_mask(const std::filesystem::path& path);

}  // namespace crackguide::io
