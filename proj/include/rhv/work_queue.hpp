#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rhv {

// Runs fn(i) for i in [0, count) on up to `workers` threads pulling from a
// shared counter. The first exception thrown by any item is rethrown after
// all threads have joined.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn &&fn)
{
    if (count == 0)
        return;
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(workers, 1u), count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure)
                            failure = std::current_exception();
                    }
                }
            });
    }
    if (failure)
        std::rethrow_exception(failure);
}

} // namespace rhv
