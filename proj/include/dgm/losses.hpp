#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "dgm/autodiff.hpp"
#include "dgm/field.hpp"
#include "dgm/priors.hpp"
#include "dgm/smath.hpp"

namespace dgm {

// K probability planes per pixel; ignore_label < 0 disables ignoring.
// Labels must lie inside [0, K).

namespace detail {

template <class T>
void check_probs(const FeatureGrid<T>& probs, const LabelMask& labels, const char* who) {
  if (probs.channels <= 0) throw DimensionError(std::string(who) + ": no classes");
  check_same_shape(probs.height, probs.width, labels.height, labels.width, who);
  check_nonempty(probs.height, probs.width, who);
}

inline void check_labels(const LabelMask& labels, int k, int ignore_label, const char* who) {
  for (int32_t l : labels.labels) {
    if (l == ignore_label) continue;
    if (l < 0 || l >= k) throw RangeError(std::string(who) + ": label outside class range");
  }
}

}  // namespace detail

// Pixels with probabilities summing off 1 beyond tol are rejected.
template <class T>
void validate_probabilities(const FeatureGrid<T>& probs, double tol = 1e-9) {
  const std::size_t hw = static_cast<std::size_t>(probs.height) * probs.width;
  for (std::size_t i = 0; i < hw; ++i) {
    double sum = 0.0;
    for (int c = 0; c < probs.channels; ++c) {
      double p = sm::value(probs.plane(c)[i]);
      if (!std::isfinite(p) || p < 0.0 || p > 1.0 + tol)
        throw NumericError("validate_probabilities: value outside [0, 1]");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > tol)
      throw NumericError("validate_probabilities: pixel does not sum to 1");
  }
}

// Online-hard-example-mined cross-entropy: keep pixels whose true-class
// probability falls below threshold; if fewer than ceil(min_kept_fraction * N)
// qualify, keep that many hardest pixels instead (ties broken row-major).
// Mean of -log p over the kept set.
template <class T>
T ce_ohem(const FeatureGrid<T>& probs, const LabelMask& labels, double threshold,
          double min_kept_fraction, int ignore_label = -1) {
  detail::check_probs(probs, labels, "ce_ohem");
  detail::check_labels(labels, probs.channels, ignore_label, "ce_ohem");
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw RangeError("ce_ohem: threshold outside (0, 1]");
  if (!(min_kept_fraction > 0.0 && min_kept_fraction <= 1.0))
    throw RangeError("ce_ohem: min_kept_fraction outside (0, 1]");

  std::vector<std::size_t> valid;
  const std::size_t hw = static_cast<std::size_t>(probs.height) * probs.width;
  for (std::size_t i = 0; i < hw; ++i) {
    if (labels.labels[i] != ignore_label) valid.push_back(i);
  }
  if (valid.empty()) throw UndefinedLossError("ce_ohem: every pixel ignored");

  auto p_true = [&](std::size_t i) { return probs.plane(labels.labels[i])[i]; };

  std::vector<std::size_t> kept;
  for (std::size_t i : valid) {
    if (sm::value(p_true(i)) < threshold) kept.push_back(i);
  }
  const std::size_t min_kept = static_cast<std::size_t>(
      std::ceil(min_kept_fraction * static_cast<double>(valid.size())));
  if (kept.size() < min_kept) {
    std::vector<std::size_t> order = valid;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return sm::value(p_true(a)) < sm::value(p_true(b));
    });
    kept.assign(order.begin(), order.begin() + min_kept);
  }

  T acc = sm::zero_like(probs.data[0]);
  for (std::size_t i : kept) acc = acc + sm::log(p_true(i));
  return acc * (-1.0 / static_cast<double>(kept.size()));
}

namespace detail {

// Jaccard-extension coefficients for one class given the sorted ground-truth
// indicator: differences of the cumulative 1 - intersection/union sequence.
inline std::vector<double> jaccard_deltas(const std::vector<char>& gt_sorted) {
  const std::size_t n = gt_sorted.size();
  std::vector<double> g(n);
  double gts = 0.0;
  for (char c : gt_sorted) gts += c;
  double inter = gts, uni = gts, prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (gt_sorted[i]) {
      inter -= 1.0;
    } else {
      uni += 1.0;
    }
    const double jac = 1.0 - inter / uni;
    g[i] = jac - prev;
    prev = jac;
  }
  return g;
}

}  // namespace detail

// Lovasz extension of the per-class Jaccard loss over error margins
// m = 1 - p(c) on the class, p(c) off it; mean over classes present in the
// ground truth. Margins are sorted descending with stable row-major ties.
template <class T>
T lovasz_softmax(const FeatureGrid<T>& probs, const LabelMask& labels, int ignore_label = -1) {
  detail::check_probs(probs, labels, "lovasz_softmax");
  detail::check_labels(labels, probs.channels, ignore_label, "lovasz_softmax");

  std::vector<std::size_t> valid;
  const std::size_t hw = static_cast<std::size_t>(probs.height) * probs.width;
  for (std::size_t i = 0; i < hw; ++i) {
    if (labels.labels[i] != ignore_label) valid.push_back(i);
  }
  if (valid.empty()) throw UndefinedLossError("lovasz_softmax: every pixel ignored");

  std::vector<char> present(static_cast<std::size_t>(probs.channels), 0);
  for (std::size_t i : valid) present[static_cast<std::size_t>(labels.labels[i])] = 1;

  T acc = sm::zero_like(probs.data[0]);
  int n_classes = 0;
  std::vector<std::size_t> order(valid.size());
  std::vector<char> gt_sorted(valid.size());
  for (int c = 0; c < probs.channels; ++c) {
    if (!present[static_cast<std::size_t>(c)]) continue;
    ++n_classes;
    std::vector<T> margins;
    margins.reserve(valid.size());
    for (std::size_t i : valid) {
      const T& p = probs.plane(c)[i];
      if (labels.labels[i] == c) {
        margins.push_back(1.0 - p);
      } else {
        margins.push_back(p);
      }
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return sm::value(margins[a]) > sm::value(margins[b]);
    });
    for (std::size_t i = 0; i < order.size(); ++i) {
      gt_sorted[i] = labels.labels[valid[order[i]]] == c;
    }
    const std::vector<double> g = detail::jaccard_deltas(gt_sorted);
    for (std::size_t i = 0; i < order.size(); ++i) {
      acc = acc + margins[order[i]] * g[i];
    }
  }
  return acc * (1.0 / n_classes);
}

// Cross-entropy weighted by 1 + d_gt so boundary-band pixels count double.
template <class T>
T boundary_ce(const FeatureGrid<T>& probs, const LabelMask& labels, const ScalarField& d_gt,
              int ignore_label = -1) {
  detail::check_probs(probs, labels, "boundary_ce");
  detail::check_labels(labels, probs.channels, ignore_label, "boundary_ce");
  check_same_shape(probs.height, probs.width, d_gt.height, d_gt.width, "boundary_ce");

  T num = sm::zero_like(probs.data[0]);
  double den = 0.0;
  const std::size_t hw = static_cast<std::size_t>(probs.height) * probs.width;
  bool any = false;
  for (std::size_t i = 0; i < hw; ++i) {
    if (labels.labels[i] == ignore_label) continue;
    any = true;
    const double wgt = 1.0 + d_gt.data[i];
    num = num + sm::log(probs.plane(labels.labels[i])[i]) * (-wgt);
    den += wgt;
  }
  if (!any) throw UndefinedLossError("boundary_ce: every pixel ignored");
  return num * (1.0 / den);
}

// Anisotropic total variation: mean absolute forward difference over both
// planes; degenerate 1x1 fields contribute 0.
template <class T>
T tv_loss(const VectorGrid2<T>& flow) {
  const int h = flow.height(), w = flow.width();
  check_nonempty(h, w, "tv_loss");
  const std::size_t n_diffs =
      2 * (static_cast<std::size_t>(h - 1) * w + static_cast<std::size_t>(h) * (w - 1));
  if (n_diffs == 0) return flow.y.data[0] * 0.0;
  T acc = sm::zero_like(flow.y.data[0]);
  for (const ScalarGrid<T>* plane : {&flow.y, &flow.x}) {
    for (int y = 0; y + 1 < h; ++y) {
      for (int x = 0; x < w; ++x) acc = acc + sm::abs(plane->at(y + 1, x) - plane->at(y, x));
    }
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x + 1 < w; ++x) acc = acc + sm::abs(plane->at(y, x + 1) - plane->at(y, x));
    }
  }
  return acc * (1.0 / static_cast<double>(n_diffs));
}

// Predicted prior fields entering the geometric consistency loss.
template <class T>
struct PriorPredT {
  ScalarGrid<T> vmap;
  VectorGrid2<T> flow;
  ScalarGrid<T> curv;
};

using PriorPred = PriorPredT<double>;

namespace detail {

template <class T>
T mse(const ScalarGrid<T>& pred, const ScalarField& target, const char* who) {
  check_same_shape(pred.height, pred.width, target.height, target.width, who);
  check_nonempty(pred.height, pred.width, who);
  T acc = sm::zero_like(pred.data[0]);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    T diff = pred.data[i] - target.data[i];
    acc = acc + diff * diff;
  }
  return acc * (1.0 / static_cast<double>(pred.size()));
}

}  // namespace detail

// MSE of vmap, flow (averaged over both planes) and curvature against their
// analytic targets, plus 0.5 * tv_loss on the predicted flow.
template <class T>
T geometric_mse(const PriorPredT<T>& pred, const GeometricPriors& target) {
  T v = detail::mse<T>(pred.vmap, target.vmap, "geometric_mse");
  check_same_shape(pred.flow.height(), pred.flow.width(), target.flow.height(),
                   target.flow.width(), "geometric_mse");
  T fy = detail::mse<T>(pred.flow.y, target.flow.y, "geometric_mse");
  T fx = detail::mse<T>(pred.flow.x, target.flow.x, "geometric_mse");
  T c = detail::mse<T>(pred.curv, target.curv, "geometric_mse");
  return v + (fy + fx) * 0.5 + c + tv_loss<T>(pred.flow) * 0.5;
}

// Weighted binary cross-entropy against a strictly binary target map;
// positive (boundary) pixels carry pos_weight. Predictions are clamped to
// [1e-7, 1 - 1e-7] with zero gradient outside.
template <class T>
T d_loss(const ScalarGrid<T>& d_pred, const ScalarField& d_gt, double pos_weight = 20.0) {
  check_same_shape(d_pred.height, d_pred.width, d_gt.height, d_gt.width, "d_loss");
  check_nonempty(d_pred.height, d_pred.width, "d_loss");
  constexpr double eps = 1e-7;
  T acc = sm::zero_like(d_pred.data[0]);
  for (std::size_t i = 0; i < d_pred.size(); ++i) {
    T p = sm::clamp(d_pred.data[i], eps, 1.0 - eps);
    const double gt = d_gt.data[i];
    if (gt == 1.0) {
      acc = acc + sm::log(p) * (-pos_weight);
    } else if (gt == 0.0) {
      acc = acc + sm::log(1.0 - p) * (-1.0);
    } else {
      throw RangeError("d_loss: target map must be binary");
    }
  }
  return acc * (1.0 / static_cast<double>(d_pred.size()));
}

// Plain mean cross-entropy for the auxiliary head.
template <class T>
T aux_loss(const FeatureGrid<T>& probs, const LabelMask& labels, int ignore_label = -1) {
  detail::check_probs(probs, labels, "aux_loss");
  detail::check_labels(labels, probs.channels, ignore_label, "aux_loss");
  T acc = sm::zero_like(probs.data[0]);
  std::size_t n = 0;
  const std::size_t hw = static_cast<std::size_t>(probs.height) * probs.width;
  for (std::size_t i = 0; i < hw; ++i) {
    if (labels.labels[i] == ignore_label) continue;
    acc = acc + sm::log(probs.plane(labels.labels[i])[i]);
    ++n;
  }
  if (n == 0) throw UndefinedLossError("aux_loss: every pixel ignored");
  return acc * (-1.0 / static_cast<double>(n));
}

// Geometric-term weight schedule over normalized training progress.
inline double gamma_geo(double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw RangeError("gamma_geo: progress outside [0, 1]");
  return 2.0 * (1.0 - t) + 0.2;
}

template <class T>
struct LossReportT {
  T total;
  T seg;
  T ce_ohem;
  T lovasz;
  T boundary;
  T vg;
  T tv;
  T d;
  T aux;
  double gamma_geo = 0.0;
};

using LossReport = LossReportT<double>;

// seg = ce + 0.8 * lovasz + 0.1 * boundary
// total = seg + gamma * (vg + d) + 0.4 * aux
template <class T>
LossReportT<T> aggregate_losses(T ce, T lovasz, T boundary, T vg, T tv, T d, T aux, double gamma) {
  T seg = ce + lovasz * 0.8 + boundary * 0.1;
  T total = seg + (vg + d) * gamma + aux * 0.4;
  return LossReportT<T>{total, seg, ce, lovasz, boundary, vg, tv, d, aux, gamma};
}

struct LossOptions {
  double ohem_threshold = 0.7;
  double min_kept_fraction = 1.0 / 16.0;
  double pos_weight = 20.0;
  int ignore_label = -1;
};

template <class T>
LossReportT<T> total_loss(const FeatureGrid<T>& probs, const FeatureGrid<T>& probs_aux,
                          const LabelMask& labels, const ScalarField& d_gt,
                          const PriorPredT<T>& pred_priors, const GeometricPriors& target_priors,
                          const ScalarGrid<T>& d_pred, double t, const LossOptions& opt = {}) {
  const double gamma = gamma_geo(t);
  T ce = ce_ohem<T>(probs, labels, opt.ohem_threshold, opt.min_kept_fraction, opt.ignore_label);
  T lov = lovasz_softmax<T>(probs, labels, opt.ignore_label);
  T bnd = boundary_ce<T>(probs, labels, d_gt, opt.ignore_label);
  T vg = geometric_mse<T>(pred_priors, target_priors);
  T tv = tv_loss<T>(pred_priors.flow);
  T d = d_loss<T>(d_pred, d_gt, opt.pos_weight);
  T aux = aux_loss<T>(probs_aux, labels, opt.ignore_label);
  return aggregate_losses<T>(ce, lov, bnd, vg, tv, d, aux, gamma);
}

}  // namespace dgm
