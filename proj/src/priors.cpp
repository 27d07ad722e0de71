#include "dgm/priors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dgm/distance.hpp"
#include "dgm/smath.hpp"
#include "dgm/stencils.hpp"

namespace dgm {

ScalarField compute_vmap(const LabelMask& instances) {
  check_nonempty(instances.height, instances.width, "compute_vmap");
  ScalarField out(instances.height, instances.width, 0.0);
  std::set<int32_t> ids(instances.labels.begin(), instances.labels.end());
  ids.erase(0);
  for (int32_t id : ids) {
    auto d2 = distance_transform_squared(instances, id);
    int64_t max_d2 = 0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (instances.labels[i] == id) max_d2 = std::max(max_d2, d2.data[i]);
    }
    // max_d2 >= 1: every instance pixel is at least one step from its
    // complement (or holds the no-background cap).
    for (std::size_t i = 0; i < instances.size(); ++i) {
      if (instances.labels[i] == id) {
        out.data[i] = std::sqrt(static_cast<double>(d2.data[i]) / static_cast<double>(max_d2));
      }
    }
  }
  return out;
}

VectorField2 compute_flow(const ScalarField& vmap) {
  VectorField2 g = sobel_gradient(vmap);
  double max_mag = 0.0;
  for (std::size_t i = 0; i < g.y.size(); ++i) {
    double m = std::hypot(g.y.data[i], g.x.data[i]);
    max_mag = std::max(max_mag, m);
  }
  const double scale = std::max(max_mag, kNormEps);
  for (std::size_t i = 0; i < g.y.size(); ++i) {
    g.y.data[i] /= scale;
    g.x.data[i] /= scale;
  }
  return g;
}

ScalarField compute_curv(const ScalarField& vmap) {
  ScalarField c = laplacian(vmap);
  double max_abs = 0.0;
  for (double v : c.data) max_abs = std::max(max_abs, std::fabs(v));
  const double scale = std::max(max_abs, kNormEps);
  for (double& v : c.data) v /= scale;
  return c;
}

ScalarField compute_dcoarse(const LabelMask& mask, bool soften) {
  ScalarField g = morphological_gradient(mask);
  return soften ? box_filter3(g) : g;
}

ScalarField refine_dmap(const ScalarField& d_coarse, const ScalarField& delta_d) {
  check_same_shape(d_coarse.height, d_coarse.width, delta_d.height, delta_d.width, "refine_dmap");
  ScalarField out(d_coarse.height, d_coarse.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out.data[i] = sm::logistic(d_coarse.data[i] + delta_d.data[i]);
  }
  return out;
}

GeometricPriors make_priors(const LabelMask& mask, bool soften) {
  GeometricPriors p;
  LabelMask instances = connected_components(mask);
  p.vmap = compute_vmap(instances);
  p.flow = compute_flow(p.vmap);
  p.curv = compute_curv(p.vmap);
  p.d_coarse = compute_dcoarse(mask, soften);
  return p;
}

void validate_priors(const GeometricPriors& p) {
  const int h = p.vmap.height, w = p.vmap.width;
  check_nonempty(h, w, "validate_priors");
  check_same_shape(h, w, p.flow.height(), p.flow.width(), "validate_priors");
  check_same_shape(h, w, p.curv.height, p.curv.width, "validate_priors");
  check_same_shape(h, w, p.d_coarse.height, p.d_coarse.width, "validate_priors");
  for (std::size_t i = 0; i < p.vmap.size(); ++i) {
    const double v = p.vmap.data[i];
    const double c = p.curv.data[i];
    const double d = p.d_coarse.data[i];
    const double mag = std::hypot(p.flow.y.data[i], p.flow.x.data[i]);
    if (!(std::isfinite(v) && std::isfinite(c) && std::isfinite(d) && std::isfinite(mag)))
      throw NumericError("validate_priors: non-finite value");
    if (v < 0.0 || v > 1.0) throw RangeError("validate_priors: vmap outside [0, 1]");
    if (c < -1.0 || c > 1.0) throw RangeError("validate_priors: curv outside [-1, 1]");
    if (d < 0.0 || d > 1.0) throw RangeError("validate_priors: d_coarse outside [0, 1]");
    if (mag > 1.0 + 1e-12) throw RangeError("validate_priors: flow magnitude above 1");
  }
}

}  // namespace dgm
