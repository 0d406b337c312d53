#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

namespace skelpaint {

// Global cap on worker threads (CLI --threads / SKELPAINT_THREADS).
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, n). Work is split into contiguous index ranges, one
// per worker; results must be written to disjoint slots so the outcome is
// independent of the thread count. Reductions happen after the join, in index
// order, never concurrently.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

// Sums v[0..n) with pairwise (tree) summation. Fixed tree shape, so the
// result does not depend on how the values were produced.
double pairwise_sum(const double* v, size_t n);

}  // namespace skelpaint
