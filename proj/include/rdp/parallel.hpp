#pragma once

#include <cstddef>
#include <functional>

namespace rdp {

/// Worker count: RDP_LAB_THREADS when set and positive, else hardware concurrency.
std::size_t thread_count();

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Indices are
/// claimed dynamically; callers write results into per-index slots so the
/// outcome never depends on scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, std::size_t threads = thread_count());

}  // namespace rdp
