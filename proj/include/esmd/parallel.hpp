#pragma once

#include <cstddef>
#include <functional>

namespace esmd {

// Default worker count: ESMD_THREADS if set and positive, else 1.
unsigned default_threads();

// Runs body(i) for i in [0, count) on up to `threads` workers pulling indices
// from a shared counter. Results must be written to per-index slots; the
// first exception thrown by any body is rethrown after all workers join.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace esmd
