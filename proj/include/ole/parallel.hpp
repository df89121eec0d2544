#pragma once

#include <cstddef>
#include <functional>

namespace ole {

// Worker count: OLE_THREADS when set to a positive integer, else the hardware concurrency.
std::size_t thread_count();

// Runs body(begin, end) over contiguous chunks of [0, n). Each index is visited
// exactly once; callers write results per index so output never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace ole
