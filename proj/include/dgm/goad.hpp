#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "dgm/autodiff.hpp"
#include "dgm/field.hpp"
#include "dgm/scan.hpp"
#include "dgm/smath.hpp"

namespace dgm {

// Normalized sampling coordinates, one (y, x) pair per output pixel.
template <class T>
struct SamplingGridT {
  ScalarGrid<T> y;
  ScalarGrid<T> x;

  SamplingGridT() = default;
  SamplingGridT(int h, int w) : y(h, w), x(h, w) {}
  int height() const { return y.height; }
  int width() const { return y.width; }
};

using SamplingGrid = SamplingGridT<double>;

// Corner-aligned identity grid: pixel (i, j) maps to
// (-1 + 2i/(H-1), -1 + 2j/(W-1)). Needs H, W >= 2.
SamplingGrid base_grid(int h, int w);

// Offset-gate weights: one 3x3 conv collapsing the two flow planes to one.
template <class T>
struct PsiT {
  std::vector<T> w;  // 2 * 9
  std::vector<T> b;  // 1
};

using Psi = PsiT<double>;

Psi make_psi(Rng& rng);

template <class T>
FeatureGrid<T> flow_as_features(const VectorGrid2<T>& flow) {
  FeatureGrid<T> f(2, flow.height(), flow.width());
  for (std::size_t i = 0; i < flow.y.size(); ++i) {
    f.plane(0)[i] = flow.y.data[i];
    f.plane(1)[i] = flow.x.data[i];
  }
  return f;
}

// alpha = 0.2 * logistic(psi(flow)), always in (0, 0.2).
template <class T>
ScalarGrid<T> compute_alpha(const VectorGrid2<T>& flow, const PsiT<T>& psi) {
  if (psi.w.size() != 18 || psi.b.size() != 1)
    throw DimensionError("compute_alpha: weight count mismatch");
  FeatureGrid<T> planes = flow_as_features(flow);
  ScalarGrid<T> raw = conv3x3_to_scalar<T>(planes, psi.w, psi.b[0]);
  ScalarGrid<T> out(raw.height, raw.width);
  for (std::size_t i = 0; i < raw.size(); ++i) out.data[i] = sm::logistic(raw.data[i]) * 0.2;
  return out;
}

// Per-axis offset: delta = flow (.) d_final (.) alpha. With valid inputs the
// magnitude never exceeds 0.2.
template <class T>
VectorGrid2<T> offset_field(const VectorGrid2<T>& flow, const ScalarGrid<T>& d_final,
                            const ScalarGrid<T>& alpha) {
  check_same_shape(flow.height(), flow.width(), d_final.height, d_final.width, "offset_field");
  check_same_shape(flow.height(), flow.width(), alpha.height, alpha.width, "offset_field");
  VectorGrid2<T> out(flow.height(), flow.width());
  for (std::size_t i = 0; i < out.y.size(); ++i) {
    T scale = d_final.data[i] * alpha.data[i];
    out.y.data[i] = flow.y.data[i] * scale;
    out.x.data[i] = flow.x.data[i] * scale;
  }
  return out;
}

// aligned = clip(base + delta, -1, 1), per coordinate.
template <class T>
SamplingGridT<T> align_grid(const SamplingGrid& base, const VectorGrid2<T>& delta) {
  check_same_shape(base.height(), base.width(), delta.height(), delta.width(), "align_grid");
  SamplingGridT<T> out(base.height(), base.width());
  for (std::size_t i = 0; i < out.y.size(); ++i) {
    out.y.data[i] = sm::clamp(base.y.data[i] + delta.y.data[i], -1.0, 1.0);
    out.x.data[i] = sm::clamp(base.x.data[i] + delta.x.data[i], -1.0, 1.0);
  }
  return out;
}

namespace detail {

struct AxisSample {
  int i0;
  int i1;
  bool exact;  // landed on a lattice plane; no interpolation on this axis
};

// Continuous source coordinate for one axis plus its lattice neighborhood.
// Coordinates within 1e-9 of a lattice plane snap to it so identity grids
// reproduce the source bitwise.
inline AxisSample resolve_axis(double fcoord, int n) {
  double r = std::nearbyint(fcoord);
  if (std::fabs(fcoord - r) < 1e-9) {
    int i = r < 0.0 ? 0 : (r > n - 1 ? n - 1 : static_cast<int>(r));
    return {i, i, true};
  }
  int i0 = static_cast<int>(std::floor(fcoord));
  if (i0 < 0) i0 = 0;
  if (i0 > n - 2) i0 = n - 2;
  return {i0, i0 + 1, false};
}

}  // namespace detail

// Bilinear weights and source indices for one normalized grid point; exposed
// for direct verification of the sampling arithmetic.
struct BilinearPoint {
  int y0, y1, x0, x1;
  double w00, w01, w10, w11;
};

BilinearPoint bilinear_weights(double gy, double gx, int h, int w);

// Bilinear resampling of src at normalized grid coordinates. On-lattice
// coordinates reproduce source values exactly; all outputs are convex
// combinations of the four surrounding source pixels.
template <class T>
FeatureGrid<T> grid_sample(const FeatureGrid<T>& src, const SamplingGridT<T>& grid) {
  check_nonempty(src.height, src.width, "grid_sample");
  if (src.height < 2 || src.width < 2) throw DimensionError("grid_sample: source below 2x2");
  const int h = grid.height(), w = grid.width();
  check_nonempty(h, w, "grid_sample");
  FeatureGrid<T> out(src.channels, h, w);
  const double sy = 0.5 * (src.height - 1);
  const double sx = 0.5 * (src.width - 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const T& gy = grid.y.at(y, x);
      const T& gx = grid.x.at(y, x);
      T fy = (gy + 1.0) * sy;
      T fx = (gx + 1.0) * sx;
      const auto ay = detail::resolve_axis(sm::value(fy), src.height);
      const auto ax = detail::resolve_axis(sm::value(fx), src.width);
      if (ay.exact && ax.exact) {
        for (int c = 0; c < src.channels; ++c) out.at(c, y, x) = src.at(c, ay.i0, ax.i0);
      } else if (ay.exact) {
        T tx = fx - static_cast<double>(ax.i0);
        T w0 = 1.0 - tx;
        for (int c = 0; c < src.channels; ++c)
          out.at(c, y, x) = w0 * src.at(c, ay.i0, ax.i0) + tx * src.at(c, ay.i0, ax.i1);
      } else if (ax.exact) {
        T ty = fy - static_cast<double>(ay.i0);
        T w0 = 1.0 - ty;
        for (int c = 0; c < src.channels; ++c)
          out.at(c, y, x) = w0 * src.at(c, ay.i0, ax.i0) + ty * src.at(c, ay.i1, ax.i0);
      } else {
        T ty = fy - static_cast<double>(ay.i0);
        T tx = fx - static_cast<double>(ax.i0);
        T wy0 = 1.0 - ty;
        T wx0 = 1.0 - tx;
        T w00 = wy0 * wx0;
        T w01 = wy0 * tx;
        T w10 = ty * wx0;
        T w11 = ty * tx;
        for (int c = 0; c < src.channels; ++c) {
          out.at(c, y, x) = (w00 * src.at(c, ay.i0, ax.i0) + w01 * src.at(c, ay.i0, ax.i1)) +
                            (w10 * src.at(c, ay.i1, ax.i0) + w11 * src.at(c, ay.i1, ax.i1));
        }
      }
    }
  }
  return out;
}

// Boundary-aware gate: out = f_up (.) (1 + d_final), broadcast over channels.
template <class T>
FeatureGrid<T> spatial_gate(const FeatureGrid<T>& f_up, const ScalarGrid<T>& d_final) {
  check_same_shape(f_up.height, f_up.width, d_final.height, d_final.width, "spatial_gate");
  FeatureGrid<T> out(f_up.channels, f_up.height, f_up.width);
  const std::size_t hw = static_cast<std::size_t>(f_up.height) * f_up.width;
  for (int c = 0; c < f_up.channels; ++c) {
    auto src = f_up.plane(c);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < hw; ++i) dst[i] = src[i] * (d_final.data[i] + 1.0);
  }
  return out;
}

// Full decode step: gate the context features, warp the low-level features
// through the offset-aligned grid, and concatenate (gated, warped).
template <class T>
FeatureGrid<T> goad_forward(const FeatureGrid<T>& f_low, const FeatureGrid<T>& f_up,
                            const VectorGrid2<T>& flow, const ScalarGrid<T>& d_final,
                            const PsiT<T>& psi) {
  check_same_shape(f_low.height, f_low.width, f_up.height, f_up.width, "goad_forward");
  check_same_shape(f_up.height, f_up.width, d_final.height, d_final.width, "goad_forward");
  ScalarGrid<T> alpha = compute_alpha<T>(flow, psi);
  VectorGrid2<T> delta = offset_field<T>(flow, d_final, alpha);
  SamplingGridT<T> grid = align_grid<T>(base_grid(f_low.height, f_low.width), delta);
  FeatureGrid<T> warped = grid_sample<T>(f_low, grid);
  FeatureGrid<T> gated = spatial_gate<T>(f_up, d_final);
  FeatureGrid<T> out(f_up.channels + f_low.channels, f_up.height, f_up.width);
  for (int c = 0; c < f_up.channels; ++c) {
    auto src = gated.plane(c);
    auto dst = out.plane(c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
  }
  for (int c = 0; c < f_low.channels; ++c) {
    auto src = warped.plane(c);
    auto dst = out.plane(f_up.channels + c);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
  }
  return out;
}

}  // namespace dgm
