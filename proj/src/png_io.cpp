#include "crackguide/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace crackguide::io {

void write_png(const Grid<std::uint8_t>& pixels, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(pixels.width());
  image.height = static_cast<png_uint_32>(pixels.height());
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, pixels.values().data(), 0, nullptr))
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
}

Grid<std::uint8_t> read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  image.format = PNG_FORMAT_GRAY;
  Grid<std::uint8_t> out(static_cast<int>(image.height), static_cast<int>(image.width));
  if (!png_image_finish_read(&image, nullptr, out.values().data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  return out;
}

void write_image(const ImageGrid& image, const std::filesystem::path& path) {
  Grid<std::uint8_t> px(image.height(), image.width());
  for (std::size_t i = 0; i < image.size(); ++i)
    px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image[i], 0.0, 1.0) * 255.0));
  write_png(px, path);
}

ImageGrid read_image(const std::filesystem::path& path) {
  const auto px = read_png(path);
  ImageGrid out(px.height(), px.width());
  for (std::size_t i = 0; i < px.size(); ++i) out[i] = px[i] / 255.0;
  return out;
}

void write_mask(const MaskGrid& mask, const std::filesystem::path& path) {
  Grid<std::uint8_t> px(mask.height(), mask.width());
  for (std::size_t i = 0; i < mask.size(); ++i) px[i] = mask[i] ? 255 : 0;
  write_png(px, path);
}

MaskGrid read_mask(const std::filesystem::path& path) {
  auto px = read_png(path);
  for (auto& v : px.values()) v = v ? 1 : 0;
  return px;
}

}  // namespace crackguide::io
