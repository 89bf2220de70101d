#pragma once

#include <cstddef>
#include <functional>

namespace edcrit {

/// Upper bound on worker threads used by multistart loops. Defaults to the
/// machine's hardware concurrency; results never depend on it.
std::size_t thread_limit();
void set_thread_limit(std::size_t n);

/// Runs fn(0..n-1), possibly concurrently. The first exception thrown by any
/// task is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace edcrit
