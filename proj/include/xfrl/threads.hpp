#pragma once

#include <cstddef>
#include <functional>

namespace xfrl {

// Worker cap, from XFRL_THREADS when set (default 1). Results are identical
// for any cap: work is split by index range and every element is produced by
// exactly one worker with an unchanged inner summation order.
int thread_budget();
void set_thread_budget(int n);

// Runs fn over [0, n) in contiguous chunks, possibly on several threads.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace xfrl
