#include "dgm/goad.hpp"

namespace dgm {

SamplingGrid base_grid(int h, int w) {
  if (h < 2 || w < 2) throw DimensionError("base_grid: needs at least 2x2");
  SamplingGrid g(h, w);
  for (int y = 0; y < h; ++y) {
    const double gy = -1.0 + 2.0 * y / (h - 1);
    for (int x = 0; x < w; ++x) {
      g.y.at(y, x) = gy;
      g.x.at(y, x) = -1.0 + 2.0 * x / (w - 1);
    }
  }
  return g;
}

Psi make_psi(Rng& rng) {
  Psi psi;
  const double lim = 1.0 / std::sqrt(18.0);
  psi.w.resize(18);
  for (double& w : psi.w) w = rng.uniform(-lim, lim);
  psi.b.assign(1, 0.0);
  return psi;
}

BilinearPoint bilinear_weights(double gy, double gx, int h, int w) {
  if (h < 2 || w < 2) throw DimensionError("bilinear_weights: source below 2x2");
  const double fy = (gy + 1.0) * 0.5 * (h - 1);
  const double fx = (gx + 1.0) * 0.5 * (w - 1);
  const auto ay = detail::resolve_axis(fy, h);
  const auto ax = detail::resolve_axis(fx, w);
  BilinearPoint p{ay.i0, ay.i1, ax.i0, ax.i1, 0.0, 0.0, 0.0, 0.0};
  const double ty = ay.exact ? 0.0 : fy - ay.i0;
  const double tx = ax.exact ? 0.0 : fx - ax.i0;
  p.w00 = (1.0 - ty) * (1.0 - tx);
  p.w01 = (1.0 - ty) * tx;
  p.w10 = ty * (1.0 - tx);
  p.w11 = ty * tx;
  return p;
}

}  // namespace dgm
