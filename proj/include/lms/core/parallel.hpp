#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace lms {

// Runs fn(0..n_tasks) across up to `threads` workers. Tasks must write to
// disjoint slots; results are then identical to serial execution regardless
// of scheduling.
inline void parallel_for(std::size_t n_tasks, int threads,
                         const std::function<void(std::size_t)>& fn) {
    if (threads <= 1 || n_tasks <= 1) {
        for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n_tasks) return;
            fn(i);
        }
    };
    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), n_tasks);
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

}  // namespace lms
