#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "crackguide/grid.hpp"

namespace crackguide {

/// H×W×D per-pixel feature vectors, stored row-major in (h, w, d) order.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int height, int width, int dim);

  int height() const { return height_; }
  int width() const { return width_; }
  int dim() const { return dim_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_); }

  std::span<double> pixel(std::size_t i) { return {values_.data() + i * dim_, static_cast<std::size_t>(dim_)}; }
  std::span<const double> pixel(std::size_t i) const {
    return {values_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  double& at(int y, int x, int d) { return values_[(static_cast<std::size_t>(y) * width_ + x) * dim_ + d]; }
  double at(int y, int x, int d) const { return values_[(static_cast<std::size_t>(y) * width_ + x) * dim_ + d]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int dim_ = 0;
  std::vector<double> values_;
};

namespace features {

inline constexpr int kDim = 8;

enum Channel : int {
  kIntensity = 0,
  kBlur1 = 1,
  kBlur2 = 2,
  kBlur4 = 3,
  kGradMag = 4,
  kDoG = 5,
  kLocalStd = 6,
  kLocalMin = 7,
};

/// Reflect (mirror, edge not repeated) index into [0, n).
int reflect(int i, int n);

/// Separable Gaussian blur, kernel radius ceil(3σ), reflect padding.
Grid<double> gaussian_blur(const Grid<double>& in, double sigma);

/// Raw 8-channel filter responses (not standardized).
FeatureMap extract_features(const ImageGrid& image);

/// Per-channel z-scoring; channels with (numerically) zero variance become 0.
FeatureMap standardize(const FeatureMap& fm);

/// extract_features followed by standardize.
FeatureMap compute(const ImageGrid& image);

/// Header (H, W, D) as u32 LE, then f32 LE values in (h, w, d) order.
void write_dump(const FeatureMap& fm, const std::filesystem::path& path);
FeatureMap read_dump(const std::filesystem::path& path);

}  // namespace features
}  // namespace crackguide
