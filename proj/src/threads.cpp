#include "xfrl/threads.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace xfrl {

static std::atomic<int> g_budget{0};  // 0 = not yet resolved

static int resolve_budget() {
    if (const char* env = std::getenv("XFRL_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<int>(v);
    }
    return 1;
}

int thread_budget() {
    int b = g_budget.load(std::memory_order_relaxed);
    if (b == 0) {
        b = resolve_budget();
        g_budget.store(b, std::memory_order_relaxed);
    }
    return b;
}

void set_thread_budget(int n) {
    g_budget.store(n >= 1 ? n : 1, std::memory_order_relaxed);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    const int workers = thread_budget();
    if (workers <= 1 || n < 2) {
        fn(0, n);
        return;
    }
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> pool;
    pool.reserve(k);
    const std::size_t chunk = (n + k - 1) / k;
    for (std::size_t w = 0; w < k; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace xfrl
