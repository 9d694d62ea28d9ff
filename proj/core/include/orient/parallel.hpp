#pragma once

#include <cstddef>
#include <functional>

namespace orient {

/// Number of workers to use when the caller passes 0.
int default_workers();

/// Runs body(i) for i in [0, count) on up to `workers` threads. Each index is
/// visited exactly once; callers write results by index so the outcome does
/// not depend on scheduling. The first exception thrown by any body is
/// rethrown after all workers join.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& body);

}  // namespace orient
