#pragma once

#include <cstdint>
#include <vector>

#include "dgm/field.hpp"
#include "dgm/goad.hpp"
#include "dgm/losses.hpp"
#include "dgm/metrics.hpp"
#include "dgm/priors.hpp"
#include "dgm/rng.hpp"
#include "dgm/scan.hpp"

namespace dgm {

// Two-region scene for the cross-boundary transport measurement: region A
// (label 1) and region B (label 2), each with its own constant per-channel
// feature vector, separated by six unlabeled background columns so only scan
// state can carry information across. The priors mark the last three
// separator columns as a crossing band with unit flow into B.
struct LeakageScene {
  LabelMask mask;
  FeatureMap features;
  GeometricPriors priors;
};

LeakageScene make_leakage_scene(int size, int channels, Rng& rng);

struct LeakagePair {
  double guided = 0.0;
  double isotropic = 0.0;
};

// Transport of region-A information into region B: mean over region-B pixels
// and channels of |y - y0| on the cascade context, where y0 is the run with
// all region-A inputs zeroed. Same parameters for both modes; guided uses the
// scene priors, isotropic none.
LeakagePair leakage_ratio(const CascadeConfig& cfg, const LeakageScene& scene);

// Canonical measurement: parameters and scene drawn from one seeded stream.
LeakagePair run_leakage(uint64_t seed, int size = 32, int channels = 8, int state_size = 4);

// Trainable parameter bundle of the toy model: context cascade, offset
// decoder gate, prior regression head, auxiliary classifier head, and the
// final classifier over the fused features.
template <class T>
struct OverfitModelT {
  CascadeConfigT<T> cfg;
  PsiT<T> psi;
  std::vector<T> prior_w, prior_b;  // channels -> 4 (vmap, flow y, flow x, curv)
  std::vector<T> aux_w, aux_b;      // channels -> classes
  std::vector<T> cls_w, cls_b;      // 2 * channels -> classes
};

using OverfitModel = OverfitModelT<double>;

inline constexpr int kToyClasses = 3;

OverfitModel make_overfit_model(int channels, int state_size, Rng& rng);

// Three-class scene: background, a square block, and a 2-pixel-wide vertical
// strip; features are class embeddings plus small per-pixel noise.
struct OverfitScene {
  LabelMask labels;
  FeatureMap features;
  GeometricPriors priors;  // analytic, binary d_coarse
};

OverfitScene make_overfit_scene(int size, int channels, Rng& rng);

struct OverfitOptions {
  uint64_t seed = 0;
  int steps = 200;
  double lr = 5e-4;
  int size = 32;
  int channels = 8;
  int state_size = 4;
  LossOptions loss;
};

struct OverfitRow {
  int step = 0;
  LossReport report;
};

struct OverfitResult {
  std::vector<OverfitRow> rows;  // steps + 1 rows; last row evaluates the final parameters
  LabelMask prediction;          // argmax classes after the last update
  double final_miou = 0.0;
};

// Full-composite training objective minimized by plain gradient descent on
// every model parameter; schedule progress t = step / steps.
OverfitResult run_overfit(const OverfitOptions& opt);

}  // namespace dgm
