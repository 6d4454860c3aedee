#pragma once

#include <cstdint>
#include <functional>

namespace habench {

/// Worker count: explicit argument if > 0, else HABENCH_THREADS, else
/// hardware concurrency.
int worker_count(int requested = 0);

/// Run body(i) for i in [0, count) across workers. Each index is
/// processed exactly once and writes only its own slots, so results are
/// identical for any worker count.
void parallel_for(std::int64_t count, const std::function<void(std::int64_t)>& body,
                  int workers = 0);

}  // namespace habench
