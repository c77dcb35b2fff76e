#pragma once

#include <cstddef>
#include <functional>

namespace spopo {

/// Worker count: SPOPO_NUM_WORKERS if set and positive, otherwise the
/// hardware concurrency (at least 1).
[[nodiscard]] int worker_count();

/// Calls body(i) for every i in [0, n) across worker_count() threads.
///
/// Each index is handled exactly once, so results written by index do not
/// depend on the number of workers. If several bodies throw, the exception
/// from the smallest index is rethrown after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace spopo
