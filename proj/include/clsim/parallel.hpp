#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace clsim::parallel {

namespace detail {

inline int initial_thread_count() {
    if (const char* env = std::getenv("CLSIM_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

inline int& thread_count_slot() {
    static int count = initial_thread_count();
    return count;
}

}  // namespace detail

inline int thread_count() { return detail::thread_count_slot(); }

inline void set_thread_count(int n) { detail::thread_count_slot() = n >= 1 ? n : 1; }

/**
 * Run fn(i) for i in [0, n) on up to thread_count() workers. Indices are
 * split into contiguous chunks, so writes to per-index slots land
 * identically for any worker count. fn must not touch shared mutable
 * state other than its own slot.
 */
template <typename Fn>
inline void for_index(std::size_t n, Fn&& fn) {
    const int workers = thread_count();
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t chunks = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    const std::size_t per = (n + chunks - 1) / chunks;
    std::vector<std::thread> pool;
    pool.reserve(chunks);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t lo = c * per;
        const std::size_t hi = std::min(n, lo + per);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn, &error, &error_mutex] {
            try {
                for (std::size_t i = lo; i < hi; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace clsim::parallel
