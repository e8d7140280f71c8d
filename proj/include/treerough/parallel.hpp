#pragma once

#include <functional>

namespace treerough {

// Worker count used by parallel_blocks. Defaults to the hardware count
// (capped); set_thread_count(n <= 0) restores the default.
int thread_count();
void set_thread_count(int n);

// Runs fn(begin, end) over a static block partition of [0, n). Blocks are
// fixed by n and the worker count alone, so callers that write per-index
// results or combine per-block results in block order stay deterministic.
void parallel_blocks(int n, const std::function<void(int begin, int end)>& fn);

}  // namespace treerough
