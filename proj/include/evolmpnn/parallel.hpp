#pragma once

#include <cstddef>
#include <functional>

namespace evolmpnn {

/// Worker threads to use: EVOLMPNN_THREADS if set to a positive integer, else the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Calls body(i) for every i in [0, n). Work is split into contiguous blocks, one per
/// worker; the first exception thrown by any call is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace evolmpnn
