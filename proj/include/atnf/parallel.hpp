#pragma once

#include <cstddef>
#include <functional>

namespace atnf {

/// Worker cap: ATNF_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
int worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index runs
/// exactly once; callers keep results per index so reductions stay ordered.
/// The first exception thrown by any fn is rethrown after all workers join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace atnf
