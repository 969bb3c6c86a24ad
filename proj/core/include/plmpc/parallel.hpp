#pragma once

#include <cstddef>
#include <functional>

namespace plmpc {

/// Number of worker threads. Reads PLMPC_THREADS once; falls back to
/// std::thread::hardware_concurrency().
int worker_thread_count();

/// Splits [0, total) into `chunks` contiguous ranges and runs
/// fn(chunk_index, begin, end) on the worker pool. The chunk grid does not
/// depend on the thread count, so per-chunk partial results can be reduced
/// in index order to give run-to-run identical sums.
void parallel_chunks(std::size_t total, int chunks,
                     const std::function<void(int, std::size_t, std::size_t)>& fn);

}  // namespace plmpc
