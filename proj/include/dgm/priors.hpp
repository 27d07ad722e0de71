#pragma once

#include "dgm/field.hpp"

namespace dgm {

inline constexpr double kNormEps = 1e-8;

template <class T>
struct GeometricPriorsT {
  ScalarGrid<T> vmap;      // [0, 1]
  VectorGrid2<T> flow;     // per-pixel magnitude <= 1
  ScalarGrid<T> curv;      // [-1, 1]
  ScalarGrid<T> d_coarse;  // [0, 1]
};

using GeometricPriors = GeometricPriorsT<double>;

// Per-instance normalized interior distance: for each instance id > 0, the
// Euclidean distance to the nearest non-instance pixel divided by that
// instance's maximum. Background stays 0; every non-empty instance attains 1.
ScalarField compute_vmap(const LabelMask& instances);

// Gradient of the vmap, normalized by the largest per-pixel magnitude
// (floored at kNormEps). Points toward increasing vmap.
VectorField2 compute_flow(const ScalarField& vmap);

// Laplacian of the vmap scaled into [-1, 1] by its largest magnitude.
ScalarField compute_curv(const ScalarField& vmap);

// Binary 3x3 label-difference boundary map; soften applies one 3x3 box pass.
ScalarField compute_dcoarse(const LabelMask& mask, bool soften = false);

// Elementwise logistic of (d_coarse + delta_d).
ScalarField refine_dmap(const ScalarField& d_coarse, const ScalarField& delta_d);

// Full prior bundle: vmap over 4-connected components of the mask, its flow
// and curvature, and the coarse boundary map of the original labels.
GeometricPriors make_priors(const LabelMask& mask, bool soften = false);

// Throws unless all range/shape invariants of the bundle hold.
void validate_priors(const GeometricPriors& p);

}  // namespace dgm
