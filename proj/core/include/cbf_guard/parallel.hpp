#pragma once

#include <cstddef>
#include <functional>

namespace cbf_guard {

/// Worker count: hardware concurrency, capped by CBF_GUARD_THREADS when set.
std::size_t worker_count();

/// Calls fn(i) for i in [0, count) across worker_count() threads. Each index
/// runs exactly once; callers write results into per-index slots so the
/// outcome does not depend on scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace cbf_guard
