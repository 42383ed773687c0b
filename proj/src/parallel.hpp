#pragma once

#include <cstddef>
#include <functional>

namespace pb {

// Worker cap: PERTURBENCH_THREADS if set, otherwise hardware concurrency.
int worker_count();

// Runs fn(i) for i in [0, n). Each index must write only its own output slot;
// results are then independent of the thread schedule.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace pb
