#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace lepton {

namespace detail {
inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{1};
    return cap;
}
} // namespace detail

/// Caps the number of workers used by sitewise loops. 1 (the default) runs
/// everything on the calling thread.
inline void set_threads(int n) { detail::thread_cap() = std::max(1, n); }
inline int threads() { return detail::thread_cap(); }

/// Runs fn(i) for i in [0, n). Workers own disjoint contiguous ranges, so
/// fn must only write state indexed by i.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const int cap = threads();
    constexpr std::size_t kMinPerWorker = 2048;
    const std::size_t workers = std::min<std::size_t>(cap, std::max<std::size_t>(1, n / kMinPerWorker));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

} // namespace lepton
