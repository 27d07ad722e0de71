#include "dgm/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "dgm/priors.hpp"
#include "dgm/rng.hpp"

namespace dgm {

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ConfusionMatrix confusion(const LabelMask& gt, const LabelMask& pred, int num_classes,
                          int ignore_label) {
  check_same_shape(gt.height, gt.width, pred.height, pred.width, "confusion");
  check_nonempty(gt.height, gt.width, "confusion");
  if (num_classes <= 0) throw DimensionError("confusion: no classes");
  ConfusionMatrix m;
  m.num_classes = num_classes;
  m.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
  for (std::size_t i = 0; i < gt.labels.size(); ++i) {
    const int32_t g = gt.labels[i];
    if (g == ignore_label) continue;
    const int32_t p = pred.labels[i];
    if (g < 0 || g >= num_classes || p < 0 || p >= num_classes)
      throw RangeError("confusion: label outside class range");
    ++m.at(g, p);
  }
  return m;
}

IouResult miou(const LabelMask& pred, const LabelMask& gt, int num_classes, int ignore_label) {
  const ConfusionMatrix m = confusion(gt, pred, num_classes, ignore_label);
  IouResult r;
  r.per_class.assign(static_cast<std::size_t>(num_classes), 0.0);
  r.included.assign(static_cast<std::size_t>(num_classes), 0);
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < num_classes; ++c) {
    const std::uint64_t tp = m.at(c, c);
    std::uint64_t fp = 0, fn = 0;
    for (int k = 0; k < num_classes; ++k) {
      if (k == c) continue;
      fp += m.at(k, c);
      fn += m.at(c, k);
    }
    const std::uint64_t uni = tp + fp + fn;
    if (uni == 0) continue;
    r.included[static_cast<std::size_t>(c)] = 1;
    r.per_class[static_cast<std::size_t>(c)] =
        static_cast<double>(tp) / static_cast<double>(uni);
    sum += r.per_class[static_cast<std::size_t>(c)];
    ++n;
  }
  if (n == 0) throw UndefinedLossError("miou: no class present in either map");
  r.miou = sum / n;
  return r;
}

namespace {

// Centered rectangle covering roughly half of each dimension, so every size
// exercises both foreground and background scan behaviour.
LabelMask bench_mask(int height, int width) {
  LabelMask mask(height, width);
  for (int y = height / 4; y < height - height / 4; ++y) {
    for (int x = width / 4; x < width - width / 4; ++x) mask.at(y, x) = 1;
  }
  return mask;
}

}  // namespace

std::vector<CostReport> measure_scan_cost(const CascadeConfig& cfg,
                                          std::span<const std::pair<int, int>> sizes,
                                          std::uint64_t seed, int repeats) {
  if (sizes.empty()) throw ConfigError("measure_scan_cost: no sizes given");
  if (repeats < 1) throw ConfigError("measure_scan_cost: repeats must be positive");
  cfg.validate();
  Rng rng(seed);
  std::vector<CostReport> reports;
  reports.reserve(sizes.size());
  for (const auto& [height, width] : sizes) {
    check_nonempty(height, width, "measure_scan_cost");
    FeatureMap f(cfg.channels(), height, width);
    for (double& v : f.data) v = rng.uniform(-1.0, 1.0);
    const GeometricPriors priors = make_priors(bench_mask(height, width));

    CostReport report;
    report.height = height;
    report.width = width;
    report.pixels = static_cast<std::uint64_t>(height) * width;

    cascade_forward<double>(f, cfg, &priors);  // warmup
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      CascadeResult out = cascade_forward<double>(f, cfg, &priors);
      const auto t1 = std::chrono::steady_clock::now();
      report.madds = out.madds;
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    report.seconds = times[times.size() / 2];
    reports.push_back(report);
  }
  return reports;
}

}  // namespace dgm
