#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace deloclab {

// Runs fn(i) for i in [0, count) on `workers` threads. Results land in a
// vector indexed by i, so the output is independent of scheduling.
template <typename T>
std::vector<T> run_indexed(std::int64_t count, int workers,
                           const std::function<T(std::int64_t)>& fn) {
    std::vector<T> out(static_cast<std::size_t>(count));
    if (count == 0) return out;
    workers = std::max(1, workers);
    if (workers == 1) {
        for (std::int64_t i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = fn(i);
        return out;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    const int spawn = static_cast<int>(std::min<std::int64_t>(workers, count));
    for (int w = 0; w < spawn; ++w) {
        pool.emplace_back([&]() {
            while (true) {
                const std::int64_t i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    out[static_cast<std::size_t>(i)] = fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace deloclab
