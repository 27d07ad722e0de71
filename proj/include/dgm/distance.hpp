#pragma once

#include <cstdint>

#include "dgm/field.hpp"

namespace dgm {

// Exact squared Euclidean distance from every pixel holding foreground_label
// to the nearest pixel holding any other value. Non-foreground pixels get 0.
// A mask with no non-foreground pixel at all uses the finite cap H*H + W*W,
// which exceeds every realizable squared distance.
ScalarGrid<int64_t> distance_transform_squared(const LabelMask& mask, int32_t foreground_label);

// Euclidean distances (square root of the above).
ScalarField distance_transform(const LabelMask& mask, int32_t foreground_label);

// Relabels each 4-connected region of equal input label with a fresh id,
// assigned in row-major order of first contact, starting at 1. Background
// (label 0) stays 0.
LabelMask connected_components(const LabelMask& mask);

}  // namespace dgm
