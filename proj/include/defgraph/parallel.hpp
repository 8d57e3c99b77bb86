#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace defgraph {

/// Worker cap used by all parallel loops. 0 means "decide from
/// DEFGRAPH_THREADS or hardware concurrency".
int resolve_threads(int requested = 0);

/// Runs fn(i) for i in [0, n). Each index writes only its own output slot,
/// so results are bitwise identical to a sequential run regardless of the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, int threads = 0);

}  // namespace defgraph
