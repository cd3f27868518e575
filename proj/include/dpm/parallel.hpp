#pragma once

#include <atomic>
#include <functional>
#include <thread>

namespace dpm::detail {

/// Runs fn(i) for i in [0, n). Each index is processed exactly once by some
/// worker; callers must keep per-index work independent so results do not
/// depend on the thread count.
inline void parallel_over(size_t n, int threads, const std::function<void(size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    int workers = threads < static_cast<int>(n) ? threads : static_cast<int>(n);
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (;;) {
                size_t i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    for (auto& t : pool) t.join();
}

}  // namespace dpm::detail
