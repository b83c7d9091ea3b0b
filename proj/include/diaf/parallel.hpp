#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "diaf/sparse.hpp"

namespace diaf {

/// Worker count for columnwise loops; 0 selects hardware concurrency.
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(j) for j in [0, n). Iterations must write disjoint outputs; the
/// first exception thrown by any worker is rethrown on the caller.
template <typename Body>
void parallel_for(Index n, Body&& body)
{
    const unsigned workers = std::min<unsigned>(thread_count(), static_cast<unsigned>(std::max<Index>(n, 1)));
    if (workers <= 1) {
        for (Index j = 0; j < n; ++j) body(j);
        return;
    }
    std::atomic<Index> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    constexpr Index chunk = 16;
    auto work = [&] {
        try {
            for (;;) {
                const Index start = next.fetch_add(chunk);
                if (start >= n) break;
                const Index stop = std::min(n, start + chunk);
                for (Index j = start; j < stop; ++j) body(j);
            }
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next.store(n);
        }
    };
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers - 1);
        for (unsigned t = 1; t < workers; ++t) pool.emplace_back(work);
        work();
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace diaf
