#pragma once
// Minimal index-parallel loop. Work items are keyed by index and write to
// their own output slot, so results do not depend on the worker count.
// Nested calls run serially on the calling worker.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace atc {

// Worker count from ATC_THREADS (0 or unset = hardware concurrency).
inline std::size_t default_thread_count() {
    std::size_t n = 0;
    if (const char* env = std::getenv("ATC_THREADS")) {
        try {
            n = static_cast<std::size_t>(std::stoul(env));
        } catch (...) {
            n = 0;
        }
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

namespace detail {
inline thread_local bool inside_parallel_region = false;
}

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn, std::size_t threads = 0) {
    if (threads == 0) threads = default_thread_count();
    threads = std::min(threads, count);
    if (threads <= 1 || detail::inside_parallel_region) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        detail::inside_parallel_region = true;
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) break;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
            }
        }
        detail::inside_parallel_region = false;
    };
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (std::size_t t = 0; t + 1 < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace atc
