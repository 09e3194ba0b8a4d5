#pragma once

#include <cstddef>
#include <functional>

namespace lf4d {

// Worker count: LF4D_THREADS if set and positive, otherwise the hardware
// concurrency. Re-read on every call so tests can override it.
int worker_count();

// Runs body(i) for i in [0, count) on up to worker_count() threads using a
// static contiguous partition. Each index must write disjoint memory; results
// then do not depend on the thread count.
void parallel_for(std::ptrdiff_t count, const std::function<void(std::ptrdiff_t)>& body);

}  // namespace lf4d
