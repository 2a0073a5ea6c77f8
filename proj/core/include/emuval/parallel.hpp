#pragma once

#include <cstddef>
#include <functional>

namespace emuval {

/// Worker count used by parallel loops. Defaults to $EMUVAL_THREADS, else the
/// number of hardware threads.
std::size_t thread_count();
void set_thread_count(std::size_t n);

/// Calls fn(i) for every i in [0, count). Iterations must write only to their
/// own output slots; results then do not depend on the worker count. Nested
/// calls run serially on the calling thread.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace emuval
