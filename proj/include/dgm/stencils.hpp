#pragma once

#include <algorithm>
#include <cstdint>
#include <span>

#include "dgm/field.hpp"
#include "dgm/smath.hpp"

namespace dgm {

// 3x3 Sobel gradient scaled by 1/8 so a unit ramp reports unit slope.
// Replicate padding; requires H, W >= 3. Plane order: (d/dy, d/dx).
VectorField2 sobel_gradient(const ScalarField& f);

// 5-point Laplacian stencil [0 1 0; 1 -4 1; 0 1 0], replicate padding,
// H, W >= 3.
ScalarField laplacian(const ScalarField& f);

// 1 where any pixel in the 3x3 neighborhood (replicate-padded) holds a
// different label, else 0.
ScalarField morphological_gradient(const LabelMask& mask);

// One pass of 3x3 box averaging with replicate padding.
ScalarField box_filter3(const ScalarField& f);

// Per-channel 3x3 convolution, replicate padding. kernels holds channels*9
// weights, row-major over (ky, kx) offsets (-1..1). Counts 9 multiply-adds
// per output element into *madds when given.
template <class T>
FeatureGrid<T> depthwise_conv3x3(const FeatureGrid<T>& f, std::span<const T> kernels,
                                 uint64_t* madds = nullptr) {
  check_nonempty(f.height, f.width, "depthwise_conv3x3");
  if (f.channels <= 0) throw DimensionError("depthwise_conv3x3: no channels");
  if (kernels.size() != static_cast<std::size_t>(f.channels) * 9)
    throw DimensionError("depthwise_conv3x3: kernel count mismatch");
  const int h = f.height, w = f.width;
  FeatureGrid<T> out(f.channels, h, w);
  for (int c = 0; c < f.channels; ++c) {
    const T* k = kernels.data() + static_cast<std::size_t>(c) * 9;
    for (int y = 0; y < h; ++y) {
      const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
      for (int x = 0; x < w; ++x) {
        const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
        T acc = k[0] * f.at(c, ym, xm);
        acc = acc + k[1] * f.at(c, ym, x);
        acc = acc + k[2] * f.at(c, ym, xp);
        acc = acc + k[3] * f.at(c, y, xm);
        acc = acc + k[4] * f.at(c, y, x);
        acc = acc + k[5] * f.at(c, y, xp);
        acc = acc + k[6] * f.at(c, yp, xm);
        acc = acc + k[7] * f.at(c, yp, x);
        acc = acc + k[8] * f.at(c, yp, xp);
        out.at(c, y, x) = acc;
      }
    }
  }
  if (madds != nullptr) *madds += static_cast<uint64_t>(f.channels) * h * w * 9;
  return out;
}

}  // namespace dgm
