#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace pixmix {

// Runs fn(i) for i in [0, n) across `workers` threads. Work items must be
// independent and fn must not let exceptions escape. workers <= 1 runs
// inline, which is also the reference execution order.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::vector<std::thread> pool;
  const int thread_count = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  pool.reserve(thread_count);
  for (int t = 0; t < thread_count; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = cursor.fetch_add(1); i < n;
           i = cursor.fetch_add(1)) {
        fn(i);
      }
    });
  }
  for (auto& thread : pool) thread.join();
}

}  // namespace pixmix
