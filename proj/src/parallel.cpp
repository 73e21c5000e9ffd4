#include "ldt/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

#include "ldt/error.hpp"

namespace ldt {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) {
    require(n >= 1, ErrorKind::Config, "thread count must be >= 1, got ", n);
    g_threads.store(n);
}

int thread_count() { return g_threads.load(); }

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    const int workers = g_threads.load();
    if (workers <= 1 || n < 2 * workers) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    // Contiguous chunks; chunk boundaries depend only on (n, workers).
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    const int64_t chunk = (n + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
        const int64_t lo = t * chunk;
        const int64_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace ldt
