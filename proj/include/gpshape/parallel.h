#pragma once

#include <cstddef>
#include <functional>

namespace gpshape {

// Global cap on worker threads (0 = hardware concurrency).
void set_max_threads(std::size_t n);
std::size_t max_threads();

// Runs fn(i) for i in [0, n). Work is split into contiguous blocks; callers
// write results by index so output does not depend on scheduling.
// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace gpshape
