// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace endodemand {

/// Worker count for grid sweeps: ENDODEMAND_THREADS if set, else hardware concurrency.
inline std::size_t worker_count() {
    std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("ENDODEMAND_THREADS")) {
        try {
            long cap = std::stol(env);
            if (cap >= 1) return std::min<std::size_t>(hw, static_cast<std::size_t>(cap));
        } catch (...) {
        }
    }
    return hw;
}

/// Runs body(i) for i in [0, count). Each index is owned by exactly one worker,
/// so results written to slot i are independent of scheduling.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
    std::size_t workers = std::min(worker_count(), count);
    if (workers <= 1 || count < 64) {
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

}  // namespace endodemand
