#pragma once

#include <cstddef>
#include <functional>

namespace aebound {

/// Caps the number of worker threads used by batch evaluation. 0 selects the
/// hardware concurrency.
void set_max_threads(std::size_t n);
std::size_t max_threads();

/// Calls fn(i) for every i in [0, n), split into contiguous blocks across
/// workers. fn must only write to slots owned by i.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace aebound
