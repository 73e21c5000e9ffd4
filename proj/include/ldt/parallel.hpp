#pragma once

#include <cstdint>
#include <functional>

namespace ldt {

// Global worker-thread setting. 1 (the default) runs everything inline on
// the calling thread; tests rely on that default.
void set_thread_count(int n);
int thread_count();

// Runs fn(i) for i in [0, n). Work items must write disjoint outputs; each
// item performs its own fixed-order accumulation, so results are
// bit-identical for every thread-count setting.
void parallel_for(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace ldt
