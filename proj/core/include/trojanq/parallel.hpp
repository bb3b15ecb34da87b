#pragma once

#include <cstddef>
#include <functional>

namespace trojanq {

// Runs task(0) .. task(count - 1) on up to `workers` threads (0 picks the
// hardware concurrency). Tasks must not share mutable state. The first
// exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& task);

std::size_t default_workers();

}  // namespace trojanq
