#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace hypersal {

/// Fan-out width: HYPERSAL_THREADS when set, otherwise the hardware count.
inline std::size_t thread_cap() {
    if (const char* env = std::getenv("HYPERSAL_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed >= 1) return static_cast<std::size_t>(parsed);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

/// Runs fn(i) for i in [0, n) across up to thread_cap() threads. Callers
/// write into index-addressed slots, so results do not depend on scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(thread_cap(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([w, n, workers, &fn] {
            for (std::size_t i = w; i < n; i += workers) fn(i);
        });
    }
    for (std::thread& t : threads) t.join();
}

}  // namespace hypersal
