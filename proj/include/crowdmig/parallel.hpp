#pragma once

#include <cstddef>
#include <functional>

namespace crowdmig {

// Worker count for internal parallelism: hardware concurrency capped by
// the CROWD_MIG_THREADS environment variable (>=1).
int thread_cap();

// Runs fn(chunk_index, begin, end) over [0, n) split into fixed-size
// chunks. The chunk layout is independent of the worker count and each
// chunk writes only to its own slot, so results are bitwise reproducible
// for any CROWD_MIG_THREADS setting. Callers reduce per-chunk results in
// chunk order.
void parallel_chunks(std::size_t n, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn);

}  // namespace crowdmig
