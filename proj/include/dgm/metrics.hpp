#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dgm/field.hpp"
#include "dgm/scan.hpp"

namespace dgm {

// Row-major K x K counts, rows = ground truth, columns = prediction.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::uint64_t> counts;

  std::uint64_t& at(int gt, int pred) {
    return counts[static_cast<std::size_t>(gt) * num_classes + pred];
  }
  std::uint64_t at(int gt, int pred) const {
    return counts[static_cast<std::size_t>(gt) * num_classes + pred];
  }
  std::uint64_t total() const;
};

ConfusionMatrix confusion(const LabelMask& gt, const LabelMask& pred, int num_classes,
                          int ignore_label = -1);

struct IouResult {
  double miou = 0.0;
  std::vector<double> per_class;  // 0 where a class is excluded
  std::vector<char> included;     // union > 0
};

// Per-class IoU = TP / (TP + FP + FN); classes absent from both maps are
// excluded from the mean.
IouResult miou(const LabelMask& pred, const LabelMask& gt, int num_classes,
               int ignore_label = -1);

struct CostReport {
  int height = 0;
  int width = 0;
  std::uint64_t pixels = 0;
  std::uint64_t madds = 0;
  double seconds = 0.0;  // median of the timed repeats
};

// Times cascade_forward (geometry-guided, priors of a centered-rectangle mask
// built outside the timed region) on random features per size. One warmup
// run, then `repeats` timed runs; multiply-add counts are exact and
// deterministic, wall time is the median.
std::vector<CostReport> measure_scan_cost(const CascadeConfig& cfg,
                                          std::span<const std::pair<int, int>> sizes,
                                          std::uint64_t seed, int repeats = 5);

}  // namespace dgm
