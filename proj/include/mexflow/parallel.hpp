#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace mex {

// Calls fn(i) for i in [0, n) on up to `jobs` threads. fn must not throw.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
    const std::size_t workers = std::min(std::max<std::size_t>(jobs, 1), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace mex
