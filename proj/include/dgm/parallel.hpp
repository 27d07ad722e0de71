#pragma once

#include <cstddef>
#include <functional>

namespace dgm {

// Thread cap from the DGM_THREADS environment variable (integer >= 1).
// Unset or unparsable values fall back to 1; command-line entry points
// validate the variable strictly before any work runs.
int thread_budget();

// Runs fn(i) for i in [0, n) over at most thread_budget() threads in
// contiguous chunks. Callers guarantee disjoint writes, so results do not
// depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace dgm
