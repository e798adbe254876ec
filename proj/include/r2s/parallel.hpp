#pragma once

#include <cstddef>
#include <functional>

namespace r2s {

/// Worker count: `R2S_THREADS` if set and positive, else hardware concurrency.
std::size_t default_thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = default).
/// Each index must write only its own output slot; results are then
/// independent of scheduling. The first exception thrown is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  std::size_t threads = 0);

}  // namespace r2s
