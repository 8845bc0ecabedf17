#pragma once

#include <cstdint>
#include <functional>

namespace amt {

/// Number of worker threads used by parallel_for. Defaults to the hardware
/// concurrency, clamped to [1, 8].
int num_threads();
void set_num_threads(int n);

/// Splits [0, n) into one contiguous chunk per worker and runs fn(begin, end)
/// on each. Chunk boundaries depend only on n and the configured thread
/// count, so results are reproducible for a fixed configuration. Nested calls
/// from inside a worker run serially.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace amt
