#pragma once

#include <cstddef>
#include <functional>

namespace mfke {

/// Worker count: MFKE_THREADS if set to a positive integer, otherwise all cores.
std::size_t worker_count();

/// Overrides the worker count for the current process (0 restores the default).
void set_worker_count(std::size_t workers);

/// Runs body(begin, end) over a static partition of [0, n). Chunks write
/// disjoint outputs, so results never depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 1024);

}  // namespace mfke
