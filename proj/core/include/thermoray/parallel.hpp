// Deterministic data-parallel loop: workers fill disjoint index ranges of
// preallocated output slots, reductions happen afterwards in index order, so
// results do not depend on the thread count.
#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace thermoray::par {

inline int& thread_count() {
  static int n = static_cast<int>(std::thread::hardware_concurrency());
  return n;
}

inline void set_thread_count(int n) { thread_count() = std::max(1, n); }

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  int workers = std::min<std::size_t>(std::max(1, thread_count()), n == 0 ? 1 : n);
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace thermoray::par
