#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dgm/error.hpp"

namespace dgm {

// Row-major H x W grid.
template <class T>
struct ScalarGrid {
  int height = 0;
  int width = 0;
  std::vector<T> data;

  ScalarGrid() = default;
  ScalarGrid(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w) {}
  ScalarGrid(int h, int w, const T& fill)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  T& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return data.size(); }
};

using ScalarField = ScalarGrid<double>;

// Two-plane vector field: y-component plane, then x-component plane.
template <class T>
struct VectorGrid2 {
  ScalarGrid<T> y;
  ScalarGrid<T> x;

  VectorGrid2() = default;
  VectorGrid2(int h, int w) : y(h, w), x(h, w) {}

  int height() const { return y.height; }
  int width() const { return y.width; }
};

using VectorField2 = VectorGrid2<double>;

// C x H x W feature planes, channel-major.
template <class T>
struct FeatureGrid {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  FeatureGrid() = default;
  FeatureGrid(int c, int h, int w)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w) {}

  T& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  const T& at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::span<T> plane(int c) {
    return {data.data() + static_cast<std::size_t>(c) * height * width,
            static_cast<std::size_t>(height) * width};
  }
  std::span<const T> plane(int c) const {
    return {data.data() + static_cast<std::size_t>(c) * height * width,
            static_cast<std::size_t>(height) * width};
  }
  std::size_t size() const { return data.size(); }
};

using FeatureMap = FeatureGrid<double>;

// H x W non-negative integer labels; 0 is background/ignore.
struct LabelMask {
  int height = 0;
  int width = 0;
  std::vector<int32_t> labels;

  LabelMask() = default;
  LabelMask(int h, int w, int32_t fill = 0)
      : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

  int32_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  int32_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return labels.size(); }
};

inline void check_nonempty(int h, int w, const char* who) {
  if (h <= 0 || w <= 0) throw DimensionError(std::string(who) + ": empty input");
}

inline void check_same_shape(int ha, int wa, int hb, int wb, const char* who) {
  if (ha != hb || wa != wb) throw DimensionError(std::string(who) + ": shape mismatch");
}

}  // namespace dgm
