#include "crackguide/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crackguide/binary_io.hpp"

namespace crackguide {

FeatureMap::FeatureMap(int height, int width, int dim)
    : height_(height), width_(width), dim_(dim) {
  if (height < 0 || width < 0 || dim < 0) throw ValidationError("feature map: negative dimension");
  values_.assign(pixels() * static_cast<std::size_t>(dim), 0.0);
}

namespace features {

int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

Grid<double> gaussian_blur(const Grid<double>& in, double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    norm += kernel[k + radius];
  }
  for (auto& k : kernel) k /= norm;

  const int h = in.height(), w = in.width();
  Grid<double> tmp(h, w), out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * in.at(y, reflect(x + k, w));
      tmp.at(y, x) = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += kernel[k + radius] * tmp.at(reflect(y + k, h), x);
      out.at(y, x) = s;
    }
  return out;
}

FeatureMap extract_features(const ImageGrid& image) {
  if (image.empty()) throw ValidationError("extract_features: empty image");
  const int h = image.height(), w = image.width();
  const auto px = [&](int y, int x) { return image.at(reflect(y, h), reflect(x, w)); };

  const Grid<double> blur1 = gaussian_blur(image, 1.0);
  const Grid<double> blur2 = gaussian_blur(image, 2.0);
  const Grid<double> blur4 = gaussian_blur(image, 4.0);

  FeatureMap fm(h, w, kDim);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Sobel, normalized so a unit ramp has unit slope. Differences are taken
      // pairwise first so a flat neighborhood gives exactly zero.
      const double gx = ((px(y - 1, x + 1) - px(y - 1, x - 1)) + 2 * (px(y, x + 1) - px(y, x - 1)) +
                         (px(y + 1, x + 1) - px(y + 1, x - 1))) / 8.0;
      const double gy = ((px(y + 1, x - 1) - px(y - 1, x - 1)) + 2 * (px(y + 1, x) - px(y - 1, x)) +
                         (px(y + 1, x + 1) - px(y - 1, x + 1))) / 8.0;

      double sum = 0.0, sum2 = 0.0;
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const double v = px(y + dy, x + dx);
          sum += v;
          sum2 += v * v;
        }
      const double mean = sum / 25.0;
      const double var = std::max(0.0, sum2 / 25.0 - mean * mean);

      double lo = std::numeric_limits<double>::infinity();
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) lo = std::min(lo, px(y + dy, x + dx));

      fm.at(y, x, kIntensity) = image.at(y, x);
      fm.at(y, x, kBlur1) = blur1.at(y, x);
      fm.at(y, x, kBlur2) = blur2.at(y, x);
      fm.at(y, x, kBlur4) = blur4.at(y, x);
      fm.at(y, x, kGradMag) = std::sqrt(gx * gx + gy * gy);
      fm.at(y, x, kDoG) = blur1.at(y, x) - blur4.at(y, x);
      fm.at(y, x, kLocalStd) = std::sqrt(var);
      fm.at(y, x, kLocalMin) = lo;
    }
  }
  return fm;
}

FeatureMap standardize(const FeatureMap& fm) {
  FeatureMap out = fm;
  const std::size_t n = fm.pixels();
  if (n == 0) return out;
  for (int d = 0; d < fm.dim(); ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += fm.pixel(i)[d];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = fm.pixel(i)[d] - mean;
      var += c * c;
    }
    var /= static_cast<double>(n);
    // Relative threshold: summation round-off on a constant channel.
    const bool constant = var <= 1e-24 * std::max(1.0, mean * mean);
    const double inv_sd = constant ? 0.0 : 1.0 / std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i) out.pixel(i)[d] = constant ? 0.0 : (fm.pixel(i)[d] - mean) * inv_sd;
  }
  return out;
}

FeatureMap compute(const ImageGrid& image) { return standardize(extract_features(image)); }

void write_dump(const FeatureMap& fm, const std::filesystem::path& path) {
  BinaryWriter out(path);
  out.u32(static_cast<std::uint32_t>(fm.height()));
  out.u32(static_cast<std::uint32_t>(fm.width()));
  out.u32(static_cast<std::uint32_t>(fm.dim()));
  for (double v : fm.values()) out.f32(static_cast<float>(v));
  out.close();
}

FeatureMap read_dump(const std::filesystem::path& path) {
  BinaryReader in(path);
  const auto h = in.u32(), w = in.u32(), d = in.u32();
  FeatureMap fm(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d));
  for (auto& v : fm.values()) v = in.f32();
  in.expect_end();
  return fm;
}

}  // namespace features
}  // namespace crackguide
