#pragma once

#include <cstddef>
#include <functional>

namespace cfdecomp {

/// Number of worker threads used by parallel_for. Defaults to 1.
void set_jobs(int jobs);
int jobs();

/// Runs body(i) for i in [0, n). Work is split into contiguous static ranges.
/// Calls made from inside a worker run serially, so nested loops never
/// oversubscribe. Every index must write only to its own output slot; results
/// are then independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace cfdecomp
