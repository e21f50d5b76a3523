#pragma once

#include <cstddef>
#include <functional>

namespace phishaudit {

// Runs body(i) for i in [0, n) on up to `threads` workers (0 = hardware
// concurrency). Each index runs exactly once; callers write results into
// pre-sized slots so output never depends on the worker count.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace phishaudit
