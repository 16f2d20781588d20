#pragma once

// Minimal static work splitting over std::thread. Results must be written to
// per-index slots by the callback so the outcome never depends on scheduling.

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace hopmp {

/// HOPMP_WORKERS when set to a positive integer, else the hardware thread
/// count (at least 1).
inline int default_workers() {
    if (const char* env = std::getenv("HOPMP_WORKERS")) {
        try {
            const int w = std::stoi(env);
            if (w > 0) return w;
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(begin, end, worker) on contiguous chunks of [0, count). The first
/// exception thrown (lowest chunk) is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t count, int workers, Fn&& fn) {
    if (count == 0) return;
    const std::size_t w = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
    if (w == 1) {
        fn(std::size_t{0}, count, 0);
        return;
    }
    std::vector<std::exception_ptr> errors(w);
    std::vector<std::thread> threads;
    threads.reserve(w);
    for (std::size_t c = 0; c < w; ++c) {
        const std::size_t begin = count * c / w;
        const std::size_t end = count * (c + 1) / w;
        threads.emplace_back([&, c, begin, end] {
            try {
                fn(begin, end, static_cast<int>(c));
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace hopmp
