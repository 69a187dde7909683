#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace lapin {

namespace detail {
inline std::atomic<unsigned>& thread_cap_storage() {
    static std::atomic<unsigned> cap{0};
    return cap;
}
}  // namespace detail

/// Worker count used by parallel loops. Defaults to $LAPIN_THREADS, else the
/// hardware concurrency.
inline unsigned thread_count() {
    unsigned cap = detail::thread_cap_storage().load();
    if (cap != 0) return cap;
    if (const char* env = std::getenv("LAPIN_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

inline void set_thread_count(unsigned n) { detail::thread_cap_storage().store(n); }

/// Runs body(i) for i in [0, count). Each index is handled by exactly one
/// worker, so results written to slot i are independent of the worker count;
/// callers reduce the slots in index order afterwards.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
    const std::size_t workers = std::min<std::size_t>(thread_count(), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) body(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace lapin
