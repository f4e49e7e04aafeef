#pragma once

#include <functional>
#include <thread>
#include <vector>

namespace riskmdp {

/// Runs fn(i) for i in [0, count) on `jobs` threads. Results must be written
/// into caller-owned slots indexed by i, so reductions stay deterministic
/// regardless of the thread count.
inline void parallel_for(long count, int jobs, const std::function<void(long)>& fn) {
    if (jobs <= 1 || count <= 1) {
        for (long i = 0; i < count; ++i) fn(i);
        return;
    }
    int workers = static_cast<int>(std::min<long>(jobs, count));
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int t = 0; t < workers; ++t)
        threads.emplace_back([&, t] {
            for (long i = t; i < count; i += workers) fn(i);
        });
    for (auto& th : threads) th.join();
}

}  // namespace riskmdp
