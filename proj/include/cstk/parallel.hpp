#ifndef CSTK_PARALLEL_HPP
#define CSTK_PARALLEL_HPP

#include <cstddef>
#include <functional>

// Deterministic parallel map: fn(i) is called once for every i in [0, n),
// partitioned over worker threads. Results must be written to preallocated
// per-index slots so the outcome is independent of scheduling.

namespace cstk {

/// Caps the number of worker threads used by scans and simulations
/// (0 = hardware concurrency). Returns the previous value.
int set_max_threads(int n);
int max_threads();

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace cstk

#endif
