#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace mmdg {

// Runs fn(0..n-1) across up to `threads` workers. Work items must be
// independent; results are index-addressed so the schedule cannot change them.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    if (threads <= 1 || n == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    };
    std::vector<std::thread> pool;
    const int k = std::min(threads, n);
    pool.reserve(static_cast<size_t>(k));
    for (int w = 0; w < k; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

}  // namespace mmdg
