#pragma once

#include <cstddef>
#include <functional>

namespace kst {

/// Worker count for grid sweeps. Defaults to KST_THREADS, else 1.
int thread_count();
void set_thread_count(int n);

/// Calls body(i) for i in [0, n), split into contiguous chunks across the
/// worker count. Bodies must write only to slot i of caller-owned storage, so
/// results never depend on the thread count. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace kst
