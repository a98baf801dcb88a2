#include "egml/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace egml {

unsigned worker_count() {
  if (const char* env = std::getenv("EGML_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1u : hc;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  unsigned workers = worker_count();
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  // Fixed block size keeps the work decomposition independent of the worker
  // count; blocks write to disjoint index ranges.
  const std::size_t block = 16;
  const std::size_t n_blocks = (n + block - 1) / block;
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  auto run = [&]() {
    for (;;) {
      std::size_t b = next.fetch_add(1);
      if (b >= n_blocks || failed.load()) return;
      std::size_t lo = b * block;
      std::size_t hi = lo + block < n ? lo + block : n;
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        if (!failed.exchange(true)) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  unsigned spawn = workers < n_blocks ? workers : static_cast<unsigned>(n_blocks);
  pool.reserve(spawn);
  for (unsigned t = 1; t < spawn; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
  if (failed.load() && err) std::rethrow_exception(err);
}

}  // namespace egml
