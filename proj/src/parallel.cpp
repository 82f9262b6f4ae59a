#include "mfke/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace mfke {

namespace {

std::atomic<std::size_t> g_override{0};

std::size_t default_workers() {
    if (const char* env = std::getenv("MFKE_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace

std::size_t worker_count() {
    const std::size_t o = g_override.load();
    return o > 0 ? o : default_workers();
}

void set_worker_count(std::size_t workers) { g_override.store(workers); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk) {
    if (n == 0) return;
    const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_chunk)));
    if (workers <= 1) {
        body(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    // One slot per chunk: the lowest failing chunk wins, which keeps the
    // reported error independent of thread timing.
    std::vector<std::exception_ptr> failures(workers);
    std::vector<std::jthread> threads;
    threads.reserve(workers - 1);
    auto run = [&](std::size_t w, std::size_t begin, std::size_t end) {
        try {
            body(begin, end);
        } catch (...) {
            failures[w] = std::current_exception();
        }
    };
    for (std::size_t w = 1; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back(run, w, begin, end);
    }
    run(0, 0, std::min(n, chunk));
    threads.clear();
    for (const auto& f : failures) {
        if (f) std::rethrow_exception(f);
    }
}

}  // namespace mfke
