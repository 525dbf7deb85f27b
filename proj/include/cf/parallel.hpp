#pragma once

#include <cstddef>
#include <functional>

namespace cf {

// Worker cap: CF_JOBS if set, otherwise hardware concurrency (at least 1).
int default_jobs();

// Runs body(i) for i in [0, n) on up to `jobs` threads. Indices are handed out in
// contiguous blocks; body must only write to state owned by index i.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace cf
