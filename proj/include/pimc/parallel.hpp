#pragma once

#include <cstddef>
#include <functional>

namespace pimc {

/// Hardware concurrency, at least 1.
unsigned default_workers();

/// Runs fn(0..n_tasks-1) on `workers` threads (0 = hardware concurrency).
/// Tasks are claimed dynamically; the first exception thrown by any task is
/// rethrown on the calling thread after all workers have stopped.
void parallel_for(std::size_t n_tasks, unsigned workers, const std::function<void(std::size_t)>& fn);

}  // namespace pimc
