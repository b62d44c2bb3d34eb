#pragma once
#include <cstddef>
#include <functional>

namespace waveinv {

// Worker cap. 0 means "use WAVEINV_THREADS or hardware concurrency".
void set_threads(int n);
int threads();

// Runs fn(i) for i in [0, n). Work is split into contiguous blocks; results
// must be written to per-index slots so the outcome never depends on the
// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace waveinv
