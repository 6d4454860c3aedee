#include "habench/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace habench {

int worker_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("HABENCH_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body, int workers) {
    const int n_workers = std::min<std::int64_t>(worker_count(workers), count);
    if (n_workers <= 1) {
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }

    std::atomic<std::int64_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
        try {
            for (std::int64_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };
    std::vector<std::thread> threads;
    for (int w = 0; w < n_workers - 1; ++w) threads.emplace_back(work);
    work();
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace habench
