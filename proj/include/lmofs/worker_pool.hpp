#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lmofs {

enum class FailurePolicy {
    stop,       ///< stop claiming new work after the first failure; in-flight items finish
    keep_going, ///< run every item regardless
};

/// Runs task(i) for i in [0, count) on `workers` threads pulling indices from a
/// shared counter. Returns one exception_ptr per index (null on success, and
/// also null for indices never started under FailurePolicy::stop; see `started`).
struct ParallelOutcome {
    std::vector<std::exception_ptr> errors;
    std::vector<char> started;

    bool ok() const {
        return std::none_of(errors.begin(), errors.end(), [](const auto& e) { return static_cast<bool>(e); });
    }
};

inline ParallelOutcome parallel_for(std::size_t count, std::size_t workers,
                                    const std::function<void(std::size_t)>& task,
                                    FailurePolicy policy = FailurePolicy::stop) {
    ParallelOutcome outcome;
    outcome.errors.resize(count);
    outcome.started.assign(count, 0);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};

    auto worker = [&] {
        for (;;) {
            if (policy == FailurePolicy::stop && failed.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            outcome.started[i] = 1;
            try {
                task(i);
            } catch (...) {
                outcome.errors[i] = std::current_exception();
                failed.store(true);
            }
        }
    };

    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        worker();
        return outcome;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    pool.clear(); // joins
    return outcome;
}

} // namespace lmofs
