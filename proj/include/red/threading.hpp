#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace red {

// Worker cap: RED_THREADS env var, else hardware concurrency. Always >= 1.
int worker_threads();

// Runs fn(i) for i in [0, n). Work units must write disjoint outputs; the
// result is then independent of scheduling. Runs inline when n or the
// worker cap is 1.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace red
