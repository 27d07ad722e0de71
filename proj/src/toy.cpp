#include "dgm/toy.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "dgm/autodiff.hpp"

namespace dgm {

LeakageScene make_leakage_scene(int size, int channels, Rng& rng) {
  if (size < 8 || size % 2 != 0) throw ConfigError("make_leakage_scene: size must be even, >= 8");
  if (channels <= 0) throw ConfigError("make_leakage_scene: no channels");
  // Region A and region B are separated by six unlabeled columns of constant
  // background. Three stacked 3x3 convs reach at most three columns, so no
  // conv path crosses the separator and any A-to-B transport is carried by
  // scan state alone. The last three separator columns are marked as a
  // crossing band: coarse distance one and unit flow pointing into B, the
  // pattern the guided layer's gate is meant to act on.
  const int gap_lo = size / 2 - 3;
  const int gap_hi = size / 2 + 2;
  const int band_lo = size / 2;
  LeakageScene scene;
  scene.mask = LabelMask(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) scene.mask.at(y, x) = x < gap_lo ? 1 : (x > gap_hi ? 2 : 0);
  }
  scene.features = FeatureMap(channels, size, size);
  for (int c = 0; c < channels; ++c) {
    const double a = rng.uniform(0.4, 0.8);
    const double b = rng.uniform(0.4, 0.8);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x)
        scene.features.at(c, y, x) = x < gap_lo ? a : (x > gap_hi ? b : 0.75);
    }
  }
  scene.priors = make_priors(scene.mask);
  for (double& v : scene.priors.d_coarse.data) v = 0.0;
  for (int y = 0; y < size; ++y) {
    for (int x = band_lo; x <= gap_hi; ++x) {
      scene.priors.d_coarse.at(y, x) = 1.0;
      scene.priors.flow.x.at(y, x) = 1.0;
      scene.priors.flow.y.at(y, x) = 0.0;
    }
  }
  return scene;
}

LeakagePair leakage_ratio(const CascadeConfig& cfg, const LeakageScene& scene) {
  bool has_a = false, has_b = false;
  for (int32_t l : scene.mask.labels) {
    if (l == 1) has_a = true;
    if (l == 2) has_b = true;
  }
  if (!has_a || !has_b) throw ConfigError("leakage_ratio: a region is empty");
  check_same_shape(scene.mask.height, scene.mask.width, scene.features.height,
                   scene.features.width, "leakage_ratio");

  FeatureMap zeroed = scene.features;
  for (int c = 0; c < zeroed.channels; ++c) {
    auto plane = zeroed.plane(c);
    for (std::size_t i = 0; i < plane.size(); ++i) {
      if (scene.mask.labels[i] == 1) plane[i] = 0.0;
    }
  }

  auto run = [&](const GeometricPriors* priors) {
    FeatureMap full = cascade_forward<double>(scene.features, cfg, priors).context;
    FeatureMap cut = cascade_forward<double>(zeroed, cfg, priors).context;
    double sum = 0.0;
    std::size_t n = 0;
    for (int c = 0; c < full.channels; ++c) {
      auto fp = full.plane(c);
      auto cp = cut.plane(c);
      for (std::size_t i = 0; i < fp.size(); ++i) {
        if (scene.mask.labels[i] != 2) continue;
        sum += std::fabs(sm::value(fp[i]) - sm::value(cp[i]));
        ++n;
      }
    }
    return sum / static_cast<double>(n);
  };

  return {run(&scene.priors), run(nullptr)};
}

LeakagePair run_leakage(uint64_t seed, int size, int channels, int state_size) {
  Rng rng(seed);
  const CascadeConfig cfg = make_cascade_config(channels, state_size, rng);
  const LeakageScene scene = make_leakage_scene(size, channels, rng);
  return leakage_ratio(cfg, scene);
}

namespace {

// Rebuilds the model with every scalar parameter passed through f, in one
// fixed traversal order. Lifting onto a tape and applying the gradient update
// both use this walk, so parameter/gradient pairing is correct by
// construction.
template <class T, class U, class F>
std::vector<T> map_vec(const std::vector<U>& v, F& f) {
  std::vector<T> out;
  out.reserve(v.size());
  for (const U& x : v) out.push_back(f(x));
  return out;
}

template <class T, class U, class F>
OverfitModelT<T> map_model(const OverfitModelT<U>& src, F f) {
  OverfitModelT<T> dst;
  dst.cfg.kinds = src.cfg.kinds;
  for (int layer = 0; layer < 3; ++layer) {
    const ScanParamsT<U>& p = src.cfg.layers[layer];
    ScanParamsT<T>& q = dst.cfg.layers[layer];
    q.channels = p.channels;
    q.state_size = p.state_size;
    q.a_log = map_vec<T>(p.a_log, f);
    q.w_delta = map_vec<T>(p.w_delta, f);
    q.b_delta = map_vec<T>(p.b_delta, f);
    q.w_b = map_vec<T>(p.w_b, f);
    q.w_c = map_vec<T>(p.w_c, f);
    q.d_skip = map_vec<T>(p.d_skip, f);
    dst.cfg.dw_kernels[layer] = map_vec<T>(src.cfg.dw_kernels[layer], f);
  }
  dst.cfg.refiner.w1 = map_vec<T>(src.cfg.refiner.w1, f);
  dst.cfg.refiner.b1 = map_vec<T>(src.cfg.refiner.b1, f);
  dst.cfg.refiner.w2 = map_vec<T>(src.cfg.refiner.w2, f);
  dst.cfg.refiner.b2 = map_vec<T>(src.cfg.refiner.b2, f);
  dst.psi.w = map_vec<T>(src.psi.w, f);
  dst.psi.b = map_vec<T>(src.psi.b, f);
  dst.prior_w = map_vec<T>(src.prior_w, f);
  dst.prior_b = map_vec<T>(src.prior_b, f);
  dst.aux_w = map_vec<T>(src.aux_w, f);
  dst.aux_b = map_vec<T>(src.aux_b, f);
  dst.cls_w = map_vec<T>(src.cls_w, f);
  dst.cls_b = map_vec<T>(src.cls_b, f);
  return dst;
}

std::vector<double> head_init(std::size_t count, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> w(count);
  for (double& v : w) v = rng.uniform(-bound, bound);
  return w;
}

ScalarGrid<ad::Value> lift_scalar(ad::Tape& tape, const ScalarField& src) {
  ScalarGrid<ad::Value> out(src.height, src.width);
  for (std::size_t i = 0; i < src.size(); ++i) out.data[i] = tape.input(src.data[i]);
  return out;
}

FeatureGrid<ad::Value> lift_features(ad::Tape& tape, const FeatureMap& src) {
  FeatureGrid<ad::Value> out(src.channels, src.height, src.width);
  for (std::size_t i = 0; i < src.size(); ++i) out.data[i] = tape.input(src.data[i]);
  return out;
}

GeometricPriorsT<ad::Value> lift_priors(ad::Tape& tape, const GeometricPriors& src) {
  GeometricPriorsT<ad::Value> out;
  out.vmap = lift_scalar(tape, src.vmap);
  out.flow.y = lift_scalar(tape, src.flow.y);
  out.flow.x = lift_scalar(tape, src.flow.x);
  out.curv = lift_scalar(tape, src.curv);
  out.d_coarse = lift_scalar(tape, src.d_coarse);
  return out;
}

// Channel softmax with the usual max shift; the shift is a constant, which
// leaves both the value and the gradient unchanged.
template <class T>
FeatureGrid<T> softmax_channels(const FeatureGrid<T>& logits) {
  FeatureGrid<T> out(logits.channels, logits.height, logits.width);
  const std::size_t hw = static_cast<std::size_t>(logits.height) * logits.width;
  for (std::size_t i = 0; i < hw; ++i) {
    double m = sm::value(logits.plane(0)[i]);
    for (int c = 1; c < logits.channels; ++c) m = std::max(m, sm::value(logits.plane(c)[i]));
    T sum = sm::exp(logits.plane(0)[i] - m);
    out.plane(0)[i] = sum;
    for (int c = 1; c < logits.channels; ++c) {
      T e = sm::exp(logits.plane(c)[i] - m);
      out.plane(c)[i] = e;
      sum = sum + e;
    }
    for (int c = 0; c < logits.channels; ++c) out.plane(c)[i] = out.plane(c)[i] / sum;
  }
  return out;
}

template <class T>
ScalarGrid<T> take_plane(const FeatureGrid<T>& f, int c) {
  ScalarGrid<T> out(f.height, f.width);
  auto src = f.plane(c);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = src[i];
  return out;
}

// Full toy forward: guided cascade, refined boundary map, offset-aligned
// fusion, classifier and auxiliary/prior heads, composite loss.
template <class T>
LossReportT<T> toy_loss(const FeatureGrid<T>& features, const GeometricPriorsT<T>& priors,
                        const OverfitModelT<T>& model, const OverfitScene& scene, double t,
                        const LossOptions& opt, FeatureGrid<T>* probs_out = nullptr) {
  CascadeResultT<T> res = cascade_forward<T>(features, model.cfg, &priors);
  ScalarGrid<T> d_final(res.delta_d.height, res.delta_d.width);
  for (std::size_t i = 0; i < d_final.size(); ++i)
    d_final.data[i] = sm::logistic(res.delta_d.data[i] + scene.priors.d_coarse.data[i]);

  FeatureGrid<T> fused =
      goad_forward<T>(features, res.context, priors.flow, d_final, model.psi);
  FeatureGrid<T> probs =
      softmax_channels(conv1x1<T>(fused, model.cls_w, model.cls_b, kToyClasses));
  FeatureGrid<T> aux_probs =
      softmax_channels(conv1x1<T>(res.context, model.aux_w, model.aux_b, kToyClasses));

  FeatureGrid<T> prior_out = conv1x1<T>(res.context, model.prior_w, model.prior_b, 4);
  PriorPredT<T> pred;
  pred.vmap = take_plane(prior_out, 0);
  pred.flow.y = take_plane(prior_out, 1);
  pred.flow.x = take_plane(prior_out, 2);
  pred.curv = take_plane(prior_out, 3);

  LossReportT<T> report = total_loss<T>(probs, aux_probs, scene.labels, scene.priors.d_coarse,
                                        pred, scene.priors, d_final, t, opt);
  if (probs_out != nullptr) *probs_out = std::move(probs);
  return report;
}

}  // namespace

OverfitModel make_overfit_model(int channels, int state_size, Rng& rng) {
  OverfitModel m;
  m.cfg = make_cascade_config(channels, state_size, rng);
  m.psi = make_psi(rng);
  m.prior_w = head_init(static_cast<std::size_t>(4) * channels, channels, rng);
  m.prior_b.assign(4, 0.0);
  m.aux_w = head_init(static_cast<std::size_t>(kToyClasses) * channels, channels, rng);
  m.aux_b.assign(kToyClasses, 0.0);
  m.cls_w = head_init(static_cast<std::size_t>(kToyClasses) * 2 * channels, 2 * channels, rng);
  m.cls_b.assign(kToyClasses, 0.0);
  return m;
}

OverfitScene make_overfit_scene(int size, int channels, Rng& rng) {
  if (size < 32) throw ConfigError("make_overfit_scene: size must be >= 32");
  if (channels <= 0) throw ConfigError("make_overfit_scene: no channels");
  OverfitScene scene;
  scene.labels = LabelMask(size, size);
  for (int y = 6; y <= 15; ++y) {
    for (int x = 6; x <= 15; ++x) scene.labels.at(y, x) = 1;  // square block
  }
  for (int y = 2; y <= size - 3; ++y) {
    scene.labels.at(y, 24) = 2;  // slender vertical strip
    scene.labels.at(y, 25) = 2;
  }

  std::vector<double> embed(static_cast<std::size_t>(kToyClasses) * channels);
  for (double& v : embed) v = rng.uniform(0.25, 1.25);
  scene.features = FeatureMap(channels, size, size);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const int k = scene.labels.at(y, x);
        scene.features.at(c, y, x) =
            embed[static_cast<std::size_t>(k) * channels + c] + 0.05 * rng.uniform(-1.0, 1.0);
      }
    }
  }
  scene.priors = make_priors(scene.labels);
  return scene;
}

OverfitResult run_overfit(const OverfitOptions& opt) {
  if (opt.steps < 1) throw ConfigError("run_overfit: steps must be >= 1");
  if (!(opt.lr > 0.0)) throw ConfigError("run_overfit: learning rate must be positive");
  Rng rng(opt.seed);
  OverfitModel model = make_overfit_model(opt.channels, opt.state_size, rng);
  const OverfitScene scene = make_overfit_scene(opt.size, opt.channels, rng);

  OverfitResult result;
  result.rows.reserve(static_cast<std::size_t>(opt.steps) + 1);
  ad::Tape tape;
  FeatureGrid<ad::Value> probs;
  for (int step = 0; step <= opt.steps; ++step) {
    const double t = static_cast<double>(step) / opt.steps;
    tape.clear();
    OverfitModelT<ad::Value> lifted =
        map_model<ad::Value>(model, [&](double v) { return tape.input(v); });
    const std::size_t n_params = tape.size();
    FeatureGrid<ad::Value> features = lift_features(tape, scene.features);
    GeometricPriorsT<ad::Value> priors = lift_priors(tape, scene.priors);

    LossReportT<ad::Value> report =
        toy_loss<ad::Value>(features, priors, lifted, scene, t, opt.loss, &probs);
    if (!std::isfinite(report.total.value()))
      throw NumericError("run_overfit: non-finite loss at step " + std::to_string(step));

    LossReport values;
    values.total = report.total.value();
    values.seg = report.seg.value();
    values.ce_ohem = report.ce_ohem.value();
    values.lovasz = report.lovasz.value();
    values.boundary = report.boundary.value();
    values.vg = report.vg.value();
    values.tv = report.tv.value();
    values.d = report.d.value();
    values.aux = report.aux.value();
    values.gamma_geo = report.gamma_geo;
    result.rows.push_back(OverfitRow{step, values});

    if (step < opt.steps) {
      tape.backward(report.total);
      std::size_t id = 0;
      model = map_model<double>(model, [&](double v) {
        return v - opt.lr * tape.grad(ad::Value(&tape, static_cast<int32_t>(id++)));
      });
      if (id != n_params) throw Error("run_overfit: parameter walk mismatch");
    }
  }

  result.prediction = LabelMask(opt.size, opt.size);
  const std::size_t hw = static_cast<std::size_t>(opt.size) * opt.size;
  for (std::size_t i = 0; i < hw; ++i) {
    int best = 0;
    double best_p = probs.plane(0)[i].value();
    for (int c = 1; c < kToyClasses; ++c) {
      const double p = probs.plane(c)[i].value();
      if (p > best_p) {
        best_p = p;
        best = c;
      }
    }
    result.prediction.labels[i] = best;
  }
  result.final_miou = miou(result.prediction, scene.labels, kToyClasses).miou;
  return result;
}

}  // namespace dgm
