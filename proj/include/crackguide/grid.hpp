#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "crackguide/error.hpp"

namespace crackguide {

/// Row-major H×W field. Used for images, masks and probability maps.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {
    if (height < 0 || width < 0) throw ValidationError("grid: negative dimension");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int y, int x) { return data_[index(y, x)]; }
  const T& at(int y, int x) const { return data_[index(y, x)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool contains(int y, int x) const { return y >= 0 && y < height_ && x >= 0 && x < width_; }
  bool same_shape(int h, int w) const { return h == height_ && w == width_; }
  template <typename U>
  bool same_shape(const Grid<U>& o) const { return o.height() == height_ && o.width() == width_; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Intensities in [0,1].
using ImageGrid = Grid<double>;
/// Binary labels, 1 = crack.
using MaskGrid = Grid<std::uint8_t>;
/// Per-pixel crack probability in (0,1).
using ProbMap = Grid<double>;

inline std::size_t count_set(const MaskGrid& m) {
  std::size_t n = 0;
  for (auto v : m.values()) n += v != 0;
  return n;
}

}  // namespace crackguide
