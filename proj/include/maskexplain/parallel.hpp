#pragma once

#include <cstddef>
#include <functional>

namespace maskexplain {

/// Worker count: MASKEXPLAIN_THREADS if set and positive, otherwise the
/// hardware concurrency.
unsigned worker_count();

/// Runs fn(i) for i in [0, n) over up to worker_count() threads. The first
/// exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace maskexplain
