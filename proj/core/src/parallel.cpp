#include "plmpc/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace plmpc {

int worker_thread_count() {
  static const int count = [] {
    if (const char* env = std::getenv("PLMPC_THREADS")) {
      int n = std::atoi(env);
      if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return count;
}

void parallel_chunks(std::size_t total, int chunks,
                     const std::function<void(int, std::size_t, std::size_t)>& fn) {
  if (total == 0) return;
  chunks = std::max(1, std::min<int>(chunks, static_cast<int>(total)));

  auto range_of = [&](int c) {
    std::size_t base = total / chunks, rem = total % chunks;
    std::size_t begin = c * base + std::min<std::size_t>(c, rem);
    std::size_t end = begin + base + (static_cast<std::size_t>(c) < rem ? 1 : 0);
    return std::pair<std::size_t, std::size_t>(begin, end);
  };

  int threads = std::min(worker_thread_count(), chunks);
  if (threads <= 1) {
    for (int c = 0; c < chunks; ++c) {
      auto [b, e] = range_of(c);
      fn(c, b, e);
    }
    return;
  }

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      int c = next.fetch_add(1);
      if (c >= chunks || failed.load()) return;
      auto [b, e] = range_of(c);
      try {
        fn(c, b, e);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

}  // namespace plmpc
