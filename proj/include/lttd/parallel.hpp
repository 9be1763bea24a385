#pragma once

#include <cstdint>
#include <functional>

namespace lttd {

// Worker cap: LTTD_THREADS if set to a positive integer, else the hardware
// concurrency (at least 1).
int thread_count();

// Runs fn(i) for i in [0, n) on up to thread_count() threads. Indices are
// split into contiguous chunks; the first exception thrown is rethrown after
// all workers finish.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace lttd
