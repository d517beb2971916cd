#pragma once

#include <cstddef>
#include <functional>

namespace lamod {

// Worker count from LAMOD_NUM_THREADS (default 1). Read once per process.
int thread_count();

// Runs body(k) for k in [0, n). Each index is handled by exactly one worker,
// so callers that write disjoint outputs per index stay bit-deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace lamod
