#pragma once

#include <cstddef>
#include <functional>

namespace eqte {

// Worker count: EQTE_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t thread_count();

// Runs body(i) for i in [0, count). Each index is executed exactly once;
// callers write results into per-index slots so the outcome does not depend
// on scheduling. Exceptions escaping body are rethrown (first one wins).
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t)>& body);

}  // namespace eqte
