#pragma once

#include <cstdlib>
#include <thread>
#include <vector>

namespace hopmix {

// Worker cap: HOPMIXER_THREADS if set, hardware concurrency otherwise.
inline std::size_t max_threads() {
    if (const char* env = std::getenv("HOPMIXER_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Runs fn(i) for i in [0, n). Results must be written to disjoint slots so
// the schedule cannot change the output.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
    const std::size_t workers = std::min(max_threads(), n == 0 ? std::size_t(1) : n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace hopmix
