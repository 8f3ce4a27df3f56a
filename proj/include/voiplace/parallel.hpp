#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace voiplace {

inline int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : int(hw);
}

// Runs fn(i) for every i in [0, n) across a static block partition.
// Determinism contract: fn must only write to state owned by index i
// (e.g. out[i]); given that, results are identical for any thread count.
// Reductions are done by the caller over the filled array, in index order.
template <typename Fn>
inline void parallel_for(int64_t n, int threads, Fn&& fn) {
    if (n <= 0) return;
    const int t = std::min<int64_t>(resolve_threads(threads), n);
    if (t <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> workers;
    workers.reserve(size_t(t));
    std::exception_ptr error;
    std::mutex error_mu;
    for (int w = 0; w < t; ++w) {
        const int64_t lo = n * w / t, hi = n * (w + 1) / t;
        workers.emplace_back([&, lo, hi] {
            try {
                for (int64_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(error_mu);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace voiplace
