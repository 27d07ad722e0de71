#pragma once

#include <cmath>

// Scalar math shim. Generic kernels call through sm:: so the same code runs on
// plain doubles and on tape-recorded values (overloads in autodiff.hpp).
namespace dgm::sm {

inline double value(double x) { return x; }
inline bool finite(double x) { return std::isfinite(x); }

inline double exp(double x) { return std::exp(x); }
inline double log(double x) { return std::log(x); }
inline double abs(double x) { return std::fabs(x); }
inline double relu(double x) { return x > 0.0 ? x : 0.0; }

inline double logistic(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double clamp(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

inline double zero_like(double) { return 0.0; }

}  // namespace dgm::sm
