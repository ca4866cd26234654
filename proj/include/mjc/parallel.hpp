#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mjc {

inline unsigned hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Chunked parallel map over [0, n). The body must write only to disjoint
// slots so results do not depend on the schedule. Exceptions from workers
// are rethrown on the calling thread.
template <class F>
void parallel_for(std::size_t n, F&& body, std::size_t grain = 64) {
  const unsigned workers = hardware_threads();
  if (n == 0) return;
  if (workers == 1 || n <= grain) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto run = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(grain);
      if (begin >= n || failed.load(std::memory_order_relaxed)) return;
      const std::size_t end = begin + grain < n ? begin + grain : n;
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (failed.load()) std::rethrow_exception(error);
}

}  // namespace mjc
