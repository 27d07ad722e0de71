#include "dgm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>

#include "dgm/autodiff.hpp"
#include "dgm/goad.hpp"
#include "dgm/losses.hpp"
#include "dgm/rng.hpp"
#include "dgm/scan.hpp"

namespace dgm {

namespace {

double make_const(double, double v) { return v; }
ad::Value make_const(ad::Value like, double v) { return like.tape()->input(v); }

template <class T>
ScanParamsT<T> const_params(const ScanParams& p, const T& like) {
  ScanParamsT<T> q;
  q.channels = p.channels;
  q.state_size = p.state_size;
  auto lift = [&](const std::vector<double>& src, std::vector<T>& dst) {
    dst.reserve(src.size());
    for (double v : src) dst.push_back(make_const(like, v));
  };
  lift(p.a_log, q.a_log);
  lift(p.w_delta, q.w_delta);
  lift(p.b_delta, q.b_delta);
  lift(p.w_b, q.w_b);
  lift(p.w_c, q.w_c);
  lift(p.d_skip, q.d_skip);
  return q;
}

std::vector<double> reduction_weights(std::size_t n, Rng& rng) {
  std::vector<double> r(n);
  for (double& v : r) v = rng.uniform(-1.0, 1.0);
  return r;
}

template <class T>
T weighted_sum(std::span<const T> v, const std::vector<double>& r) {
  T acc = v[0] * r[0];
  for (std::size_t i = 1; i < v.size(); ++i) acc = acc + v[i] * r[i];
  return acc;
}

double signed_mag(Rng& rng, double lo, double hi) {
  const double m = rng.uniform(lo, hi);
  return rng.uniform() < 0.5 ? -m : m;
}

// ---- scan scope -----------------------------------------------------------

// One channel, full parameter set: [seq(n), a_log(S), w_delta, b_delta,
// w_b(S), w_c(S), d_skip].
struct ScanCheck {
  static constexpr int n = 6, S = 2;
  std::vector<double> x, r;

  ScanCheck(Rng& rng, int) {
    for (int i = 0; i < n; ++i) x.push_back(rng.uniform(-1.0, 1.0));
    for (int s = 0; s < S; ++s) x.push_back(std::log(rng.uniform(0.5, 1.5)));
    x.push_back(rng.uniform(-1.0, 1.0));
    x.push_back(rng.uniform(-1.0, 0.0));
    for (int s = 0; s < S; ++s) x.push_back(rng.uniform(-1.0, 1.0));
    for (int s = 0; s < S; ++s) x.push_back(rng.uniform(-1.0, 1.0));
    x.push_back(rng.uniform(0.5, 1.5));
    r = reduction_weights(n, rng);
  }

  template <class T>
  T eval(std::span<const T> v) const {
    ScanParamsT<T> p;
    p.channels = 1;
    p.state_size = S;
    std::size_t k = n;
    for (int s = 0; s < S; ++s) p.a_log.push_back(v[k++]);
    p.w_delta.push_back(v[k++]);
    p.b_delta.push_back(v[k++]);
    for (int s = 0; s < S; ++s) p.w_b.push_back(v[k++]);
    for (int s = 0; s < S; ++s) p.w_c.push_back(v[k++]);
    p.d_skip.push_back(v[k++]);
    std::vector<T> y(n, v[0]);
    selective_scan_1d<T>(v.subspan(0, n), p, 0, y);
    return weighted_sum(std::span<const T>(y), r);
  }
};

// Whole-grid scan with fixed parameters; the traversal direction rotates per
// instance.
struct DirectionalCheck {
  static constexpr int C = 2, H = 3, W = 4;
  ScanParams params;
  ScanDirection dir;
  std::vector<double> x, r;

  DirectionalCheck(Rng& rng, int instance)
      : params(make_scan_params(C, 2, rng)), dir(kScanDirections[instance % 4]) {
    for (int i = 0; i < C * H * W; ++i) x.push_back(rng.uniform(-1.0, 1.0));
    r = reduction_weights(x.size(), rng);
  }

  template <class T>
  T eval(std::span<const T> v) const {
    FeatureGrid<T> f(C, H, W);
    for (std::size_t i = 0; i < v.size(); ++i) f.data[i] = v[i];
    FeatureGrid<T> out = directional_scan<T>(f, const_params(params, v[0]), dir);
    return weighted_sum(std::span<const T>(out.data), r);
  }
};

// Prompt construction and feature modulation; flow components stay away from
// the ReLU kink at zero projection.
struct PromptCheck {
  static constexpr int C = 2, H = 3, W = 3, HW = H * W;
  ScanDirection dir;
  std::vector<double> x, r;

  PromptCheck(Rng& rng, int instance) : dir(kScanDirections[instance % 4]) {
    for (int i = 0; i < HW; ++i) x.push_back(rng.uniform(0.1, 1.0));       // d_coarse
    for (int i = 0; i < 2 * HW; ++i) x.push_back(signed_mag(rng, 0.05, 0.9));  // flow
    for (int i = 0; i < C * HW; ++i) x.push_back(rng.uniform(-1.0, 1.0));  // features
    r = reduction_weights(static_cast<std::size_t>(C) * HW, rng);
  }

  template <class T>
  T eval(std::span<const T> v) const {
    ScalarGrid<T> dc(H, W);
    VectorGrid2<T> flow(H, W);
    FeatureGrid<T> f(C, H, W);
    for (int i = 0; i < HW; ++i) dc.data[i] = v[i];
    for (int i = 0; i < HW; ++i) flow.y.data[i] = v[HW + i];
    for (int i = 0; i < HW; ++i) flow.x.data[i] = v[2 * HW + i];
    for (int i = 0; i < C * HW; ++i) f.data[i] = v[3 * HW + i];
    ScalarGrid<T> prompt = geometric_prompt<T>(dc, flow, dir);
    FeatureGrid<T> out = modulate<T>(f, prompt);
    return weighted_sum(std::span<const T>(out.data), r);
  }
};

// ---- offset-decoder scope -------------------------------------------------

// alpha head: [flow(2 * HW), psi_w(18), psi_b(1)].
struct AlphaCheck {
  static constexpr int H = 4, W = 4, HW = H * W;
  std::vector<double> x, r;

  AlphaCheck(Rng& rng, int) {
    for (int i = 0; i < 2 * HW; ++i) x.push_back(rng.uniform(-0.9, 0.9));
    for (int i = 0; i < 18; ++i) x.push_back(rng.uniform(-0.24, 0.24));
    x.push_back(rng.uniform(-0.2, 0.2));
    r = reduction_weights(HW, rng);
  }

  template <class T>
  T eval(std::span<const T> v) const {
    VectorGrid2<T> flow(H, W);
    for (int i = 0; i < HW; ++i) flow.y.data[i] = v[i];
    for (int i = 0; i < HW; ++i) flow.x.data[i] = v[HW + i];
    PsiT<T> psi;
    for (int i = 0; i < 18; ++i) psi.w.push_back(v[2 * HW + i]);
    psi.b.push_back(v[2 * HW + 18]);
    ScalarGrid<T> alpha = compute_alpha<T>(flow, psi);
    return weighted_sum(std::span<const T>(alpha.data), r);
  }
};

// Offset construction: [flow(2 * HW), d_final(HW), alpha(HW)].
struct OffsetCheck {
  static constexpr int H = 3, W = 3, HW = H * W;
  std::vector<double> x, r;

  OffsetCheck(Rng& rng, int) {
    for (int i = 0; i < 2 * HW; ++i) x.push_back(rng.uniform(-0.9, 0.9));
    for (int i = 0; i < HW; ++i) x.push_back(rng.uniform(0.1, 0.9));
    for (int i = 0; i < HW; ++i) x.push_back(rng.uniform(0.01, 0.19));
    r = reduction_weights(static_cast<std::size_t>(2) * HW, rng);
  }

  template <class T>
  T eval(std::span<const T> v) const {
    VectorGrid2<T> flow(H, W);
    ScalarGrid<T> d(H, W), a(H, W);
    for (int i = 0; i < HW; ++i) flow.y.data[i] = v[i];
    for (int i = 0; i < HW; ++i) flow.x.data[i] = v[HW + i];
    for (int i = 0; i < HW; ++i) d.data[i] = v[2 * HW + i];
    for (int i = 0; i < HW; ++i) a.data[i] = v[3 * HW + i];
    VectorGrid2<T> out = offset_field<T>(flow, d, a);
    std::vector<T> flat(out.y.data);
    flat.insert(flat.end(), out.x.data.begin(), out.x.data.end());
    return weighted_sum(std::span<const T>(flat), r);
  }
};

// Bilinear sampling w.r.t. both the source values and the grid coordinates;
// coordinates sampled strictly between lattice planes.
struct GridSampleCheck {
  static constexpr int C = 2, SH = 5, SW = 5, H = 3, W = 3, HW = H * W;
  std::vector<double> x, r;

  GridSampleCheck(Rng& rng, int) {
    for (int i = 0; i < C * SH * SW; ++i) x.push_back(rng.uniform(-1.0, 1.0));
    for (int i = 0; i < HW; ++i) {
      const double f = static_cast<double>(rng.uniform_int(0, SH - 2)) + rng.uniform(0.08, 0.92);
      x.push_back(f / (0.5 * (SH - 1)) - 1.0);  // gy
    }
    for (int i = 0; i < HW; ++i) {
      const double f = static_cast<double>(rng.uniform_int(0, SW - 2)) + rng.uniform(0.08, 0.92);
      x.push_back(f / (0.5 * (SW - 1)) - 1.0);  // gx
    }
    r = reduction_weights(static_cast<std::size_t>(C) * HW, rng);
  }

  template <class T>
  T eval(std::span<const T> v) const {
    FeatureGrid<T> src(C, SH, SW);
    for (int i = 0; i < C * SH * SW; ++i) src.data[i] = v[i];
    SamplingGridT<T> grid(H, W);
    for (int i = 0; i < HW; ++i) grid.y.data[i] = v[C * SH * SW + i];
    for (int i = 0; i < HW; ++i) grid.x.data[i] = v[C * SH * SW + HW + i];
    FeatureGrid<T> out = grid_sample<T>(src, grid);
    return weighted_sum(std::span<const T>(out.data), r);
  }
};

// Full decode path: [f_low(C*HW), f_up(C*HW), flow(2*HW), d_final(HW),
// psi(19)]. Flow components keep magnitude >= 0.3 and point inward on the
// border so offsets never land on a lattice plane or the clip boundary.
struct GoadCheck {
  static constexpr int C = 2, H = 4, W = 4, HW = H * W;
  std::vector<double> x, r;

  GoadCheck(Rng& rng, int) {
    for (int i = 0; i < 2 * C * HW; ++i) x.push_back(rng.uniform(-1.0, 1.0));
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) {
        double m = rng.uniform(0.3, 0.8);
        if (y == 0) {
          x.push_back(m);
        } else if (y == H - 1) {
          x.push_back(-m);
        } else {
          x.push_back(rng.uniform() < 0.5 ? -m : m);
        }
      }
    }
    for (int y = 0; y < H; ++y) {
      for (int xx = 0; xx < W; ++xx) {
        double m = rng.uniform(0.3, 0.8);
        if (xx == 0) {
          x.push_back(m);
        } else if (xx == W - 1) {
          x.push_back(-m);
        } else {
          x.push_back(rng.uniform() < 0.5 ? -m : m);
        }
      }
    }
    for (int i = 0; i < HW; ++i) x.push_back(rng.uniform(0.3, 0.9));
    for (int i = 0; i < 18; ++i) x.push_back(rng.uniform(-0.24, 0.24));
    x.push_back(rng.uniform(-0.2, 0.2));
    r = reduction_weights(static_cast<std::size_t>(2) * C * HW, rng);
  }

  template <class T>
  T eval(std::span<const T> v) const {
    std::size_t k = 0;
    FeatureGrid<T> f_low(C, H, W), f_up(C, H, W);
    for (int i = 0; i < C * HW; ++i) f_low.data[i] = v[k++];
    for (int i = 0; i < C * HW; ++i) f_up.data[i] = v[k++];
    VectorGrid2<T> flow(H, W);
    for (int i = 0; i < HW; ++i) flow.y.data[i] = v[k++];
    for (int i = 0; i < HW; ++i) flow.x.data[i] = v[k++];
    ScalarGrid<T> d(H, W);
    for (int i = 0; i < HW; ++i) d.data[i] = v[k++];
    PsiT<T> psi;
    for (int i = 0; i < 18; ++i) psi.w.push_back(v[k++]);
    psi.b.push_back(v[k++]);
    FeatureGrid<T> out = goad_forward<T>(f_low, f_up, flow, d, psi);
    return weighted_sum(std::span<const T>(out.data), r);
  }
};

// ---- loss scope -----------------------------------------------------------

constexpr int kPx = 12, kCls = 3;

LabelMask fixed_labels() {
  LabelMask m(3, 4);
  for (std::size_t i = 0; i < m.size(); ++i) m.labels[i] = static_cast<int32_t>(i % kCls);
  return m;
}

template <class T>
FeatureGrid<T> probs_from(std::span<const T> v) {
  FeatureGrid<T> p(kCls, 3, 4);
  for (int i = 0; i < kCls * kPx; ++i) p.data[i] = v[i];
  return p;
}

// Mined cross-entropy: true-class probabilities come from a shuffled,
// well-separated lattice so the kept set is stable under the probe step.
struct CeOhemCheck {
  LabelMask labels = fixed_labels();
  std::vector<double> x;

  CeOhemCheck(Rng& rng, int) {
    x.assign(static_cast<std::size_t>(kCls) * kPx, 0.0);
    std::vector<double> lattice(kPx);
    for (int i = 0; i < kPx; ++i) lattice[i] = 0.08 + 0.07 * i;
    for (int i = kPx - 1; i > 0; --i)
      std::swap(lattice[i], lattice[rng.uniform_int(0, i)]);
    for (int i = 0; i < kPx; ++i) {
      for (int c = 0; c < kCls; ++c) {
        x[static_cast<std::size_t>(c) * kPx + i] =
            c == labels.labels[i] ? lattice[i] + rng.uniform(-0.002, 0.002)
                                  : rng.uniform(0.05, 0.95);
      }
    }
  }

  template <class T>
  T eval(std::span<const T> v) const {
    return ce_ohem<T>(probs_from(v), labels, 0.7, 1.0 / 16.0);
  }
};

// Jaccard extension: rejection sampling keeps every per-class margin list
// free of near-ties so the sort order is stable.
struct LovaszCheck {
  LabelMask labels = fixed_labels();
  std::vector<double> x;

  LovaszCheck(Rng& rng, int) {
    for (;;) {
      x.clear();
      for (int i = 0; i < kCls * kPx; ++i) x.push_back(rng.uniform(0.03, 0.97));
      bool ok = true;
      for (int c = 0; c < kCls && ok; ++c) {
        std::vector<double> m;
        for (int i = 0; i < kPx; ++i) {
          const double p = x[static_cast<std::size_t>(c) * kPx + i];
          m.push_back(labels.labels[i] == c ? 1.0 - p : p);
        }
        std::sort(m.begin(), m.end());
        for (std::size_t i = 1; i < m.size(); ++i) {
          if (m[i] - m[i - 1] < 0.004) ok = false;
        }
      }
      if (ok) return;
    }
  }

  template <class T>
  T eval(std::span<const T> v) const {
    return lovasz_softmax<T>(probs_from(v), labels);
  }
};

struct BoundaryCheck {
  LabelMask labels = fixed_labels();
  ScalarField d_gt;
  std::vector<double> x;

  BoundaryCheck(Rng& rng, int) : d_gt(3, 4) {
    for (std::size_t i = 0; i < d_gt.size(); ++i) d_gt.data[i] = i % 3 == 0 ? 1.0 : 0.0;
    for (int i = 0; i < kCls * kPx; ++i) x.push_back(rng.uniform(0.05, 0.95));
  }

  template <class T>
  T eval(std::span<const T> v) const {
    return boundary_ce<T>(probs_from(v), labels, d_gt);
  }
};

// Field regression including total variation: flow planes come from shuffled
// lattices so no forward difference sits at the |.| kink.
struct PriorMseCheck {
  GeometricPriors target;
  std::vector<double> x;

  PriorMseCheck(Rng& rng, int) {
    target.vmap = ScalarField(3, 4);
    target.flow = VectorField2(3, 4);
    target.curv = ScalarField(3, 4);
    target.d_coarse = ScalarField(3, 4);
    for (std::size_t i = 0; i < 12; ++i) {
      target.vmap.data[i] = rng.uniform(0.0, 1.0);
      target.flow.y.data[i] = rng.uniform(-0.5, 0.5);
      target.flow.x.data[i] = rng.uniform(-0.5, 0.5);
      target.curv.data[i] = rng.uniform(-1.0, 1.0);
    }
    auto lattice_plane = [&]() {
      std::vector<double> v(12);
      for (int i = 0; i < 12; ++i) v[i] = -0.3 + 0.05 * i;
      for (int i = 11; i > 0; --i) std::swap(v[i], v[rng.uniform_int(0, i)]);
      for (double& p : v) p += rng.uniform(-0.002, 0.002);
      return v;
    };
    for (int i = 0; i < 12; ++i) x.push_back(rng.uniform(0.0, 1.0));  // vmap
    for (double v : lattice_plane()) x.push_back(v);                  // flow y
    for (double v : lattice_plane()) x.push_back(v);                  // flow x
    for (int i = 0; i < 12; ++i) x.push_back(rng.uniform(-1.0, 1.0));  // curv
  }

  template <class T>
  T eval(std::span<const T> v) const {
    PriorPredT<T> pred;
    pred.vmap = ScalarGrid<T>(3, 4);
    pred.flow = VectorGrid2<T>(3, 4);
    pred.curv = ScalarGrid<T>(3, 4);
    for (int i = 0; i < 12; ++i) pred.vmap.data[i] = v[i];
    for (int i = 0; i < 12; ++i) pred.flow.y.data[i] = v[12 + i];
    for (int i = 0; i < 12; ++i) pred.flow.x.data[i] = v[24 + i];
    for (int i = 0; i < 12; ++i) pred.curv.data[i] = v[36 + i];
    return geometric_mse<T>(pred, target);
  }
};

struct DLossCheck {
  ScalarField d_gt;
  std::vector<double> x;

  DLossCheck(Rng& rng, int) : d_gt(3, 4) {
    for (std::size_t i = 0; i < d_gt.size(); ++i) d_gt.data[i] = i % 4 == 0 ? 1.0 : 0.0;
    for (int i = 0; i < kPx; ++i) x.push_back(rng.uniform(0.05, 0.95));
  }

  template <class T>
  T eval(std::span<const T> v) const {
    ScalarGrid<T> pred(3, 4);
    for (int i = 0; i < kPx; ++i) pred.data[i] = v[i];
    return d_loss<T>(pred, d_gt, 20.0);
  }
};

struct AuxCheck {
  LabelMask labels = fixed_labels();
  std::vector<double> x;

  AuxCheck(Rng& rng, int) {
    for (int i = 0; i < kCls * kPx; ++i) x.push_back(rng.uniform(0.05, 0.95));
  }

  template <class T>
  T eval(std::span<const T> v) const {
    return aux_loss<T>(probs_from(v), labels);
  }
};

// Linear mixing of the seven scalar terms into the total.
struct MixCheck {
  std::vector<double> x;

  MixCheck(Rng& rng, int) {
    for (int i = 0; i < 7; ++i) x.push_back(rng.uniform(0.1, 2.0));
  }

  template <class T>
  T eval(std::span<const T> v) const {
    return aggregate_losses<T>(v[0], v[1], v[2], v[3], v[4], v[5], v[6], gamma_geo(0.35)).total;
  }
};

// ---- runner ---------------------------------------------------------------

template <class Check>
GradCheckReport run_check(const char* name, uint64_t seed, int instances, bool corrupt) {
  GradCheckReport rep;
  rep.op = name;
  rep.instances = instances;
  for (int k = 0; k < instances; ++k) {
    Rng rng(seed * 1000003ull + static_cast<uint64_t>(k) * 7919ull + 17ull);
    Check chk(rng, k);
    auto objective = [&](std::span<const double> v) { return chk.template eval<double>(v); };
    const std::vector<double> fd = ad::finite_difference(objective, chk.x);

    ad::Tape tape;
    std::vector<ad::Value> vx;
    vx.reserve(chk.x.size());
    for (double v : chk.x) vx.push_back(tape.input(v));
    ad::Value out = chk.template eval<ad::Value>(std::span<const ad::Value>(vx));
    tape.backward(out);

    for (std::size_t i = 0; i < vx.size(); ++i) {
      double g = tape.grad(vx[i]);
      if (corrupt) g += 0.01;
      const double err =
          std::fabs(g - fd[i]) / std::max({std::fabs(g), std::fabs(fd[i]), 1e-6});
      if (err > rep.max_rel_err) {
        rep.max_rel_err = err;
        rep.worst_arg = "input " + std::to_string(i) + ", instance " + std::to_string(k);
      }
    }
  }
  return rep;
}

}  // namespace

std::vector<GradCheckReport> run_gradcheck(GradScope scope, uint64_t seed, int instances,
                                           bool corrupt) {
  if (instances < 1) throw ConfigError("run_gradcheck: instances must be positive");
  std::vector<GradCheckReport> out;
  const bool scan = scope == GradScope::Scan || scope == GradScope::All;
  const bool goad = scope == GradScope::Goad || scope == GradScope::All;
  const bool losses = scope == GradScope::Losses || scope == GradScope::All;
  uint64_t op = 1;
  auto add = [&]<class Check>(std::in_place_type_t<Check>, const char* name, bool enabled) {
    const uint64_t s = seed + 1000000007ull * op++;
    if (enabled) out.push_back(run_check<Check>(name, s, instances, corrupt));
  };
  add(std::in_place_type<ScanCheck>, "scan_1d", scan);
  add(std::in_place_type<DirectionalCheck>, "directional_scan", scan);
  add(std::in_place_type<PromptCheck>, "prompt_modulate", scan);
  add(std::in_place_type<AlphaCheck>, "offset_gate", goad);
  add(std::in_place_type<OffsetCheck>, "offset_field", goad);
  add(std::in_place_type<GridSampleCheck>, "grid_sample", goad);
  add(std::in_place_type<GoadCheck>, "offset_decode", goad);
  add(std::in_place_type<CeOhemCheck>, "ce_ohem", losses);
  add(std::in_place_type<LovaszCheck>, "lovasz", losses);
  add(std::in_place_type<BoundaryCheck>, "boundary_ce", losses);
  add(std::in_place_type<PriorMseCheck>, "prior_mse", losses);
  add(std::in_place_type<DLossCheck>, "dmap_bce", losses);
  add(std::in_place_type<AuxCheck>, "aux_ce", losses);
  add(std::in_place_type<MixCheck>, "loss_mix", losses);
  return out;
}

}  // namespace dgm
