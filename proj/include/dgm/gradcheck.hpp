#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dgm {

enum class GradScope { Scan, Goad, Losses, All };

struct GradCheckReport {
  std::string op;
  int instances = 0;
  double max_rel_err = 0.0;
  std::string worst_arg;  // input index and instance of the largest error
};

inline constexpr double kGradTol = 1e-4;

// Compares reverse-mode gradients against central finite differences for
// every differentiable operator in the scope, over seeded random instances
// with inputs sampled away from kinks (ReLU zeros, sort ties, selection
// thresholds, clamp edges, interpolation lattice planes). `corrupt` offsets
// every reported gradient; it exists so the failure path is testable.
std::vector<GradCheckReport> run_gradcheck(GradScope scope, uint64_t seed, int instances = 20,
                                           bool corrupt = false);

}  // namespace dgm
