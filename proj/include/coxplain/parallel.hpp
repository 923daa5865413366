#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace coxplain {

/// Resolves the worker count: explicit request > COXPLAIN_THREADS env var >
/// hardware concurrency. Always at least 1.
int resolve_threads(int requested);

/// Runs fn(i) for i in [0, n) across `threads` workers using a static block
/// partition. Each call must write its result into a preallocated slot keyed
/// by i, so the output is identical regardless of thread count. Exceptions
/// from workers are rethrown on the calling thread (first one wins).
template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  std::size_t workers = static_cast<std::size_t>(threads < 1 ? 1 : threads);
  if (workers > n) workers = n;
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t lo = w * chunk;
    std::size_t hi = lo + chunk < n ? lo + chunk : n;
    pool.emplace_back([&fn, &errors, w, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace coxplain
