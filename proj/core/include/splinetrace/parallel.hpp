#pragma once

#include <cstddef>
#include <functional>

namespace splinetrace {

/// Process-wide cap on worker threads used by fit_all and multi-seed tracing.
/// 0 means "use available parallelism".
void set_max_threads(std::size_t threads);
std::size_t max_threads();

/// Runs body(i) for i in [0, count). Each index is visited exactly once; the
/// body must only write state owned by its index.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace splinetrace
