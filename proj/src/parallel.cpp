#include "treerough/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace treerough {

namespace {
std::atomic<int> g_threads{0};
}

int thread_count() {
    int n = g_threads.load(std::memory_order_relaxed);
    if (n > 0) return n;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 16u));
}

void set_thread_count(int n) { g_threads.store(n, std::memory_order_relaxed); }

void parallel_blocks(int n, const std::function<void(int, int)>& fn) {
    if (n <= 0) return;
    int workers = std::min(thread_count(), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    int chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        int b = w * chunk, e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace treerough
