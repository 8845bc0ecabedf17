#include "amt/threads.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace amt {

namespace {
std::atomic<int> g_threads{0};
thread_local bool t_in_worker = false;

int default_threads() {
  unsigned hc = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hc, 1u, 8u));
}
}  // namespace

int num_threads() {
  int n = g_threads.load(std::memory_order_relaxed);
  return n > 0 ? n : default_threads();
}

void set_num_threads(int n) { g_threads.store(std::max(0, n), std::memory_order_relaxed); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  const int workers = t_in_worker ? 1 : std::min<int64_t>(num_threads(), n);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  const int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    const int64_t begin = w * chunk;
    const int64_t end = std::min<int64_t>(begin + chunk, n);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      t_in_worker = true;
      fn(begin, end);
      t_in_worker = false;
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace amt
