#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace graspseq {

// Runs fn(i) for i in [0, n) on up to `jobs` threads (jobs <= 1 runs inline).
// Work is claimed dynamically; callers write results into slot i so output
// order never depends on scheduling. The exception from the lowest failing
// index is rethrown after all workers finish.
template <typename Fn>
void parallelFor(int n, int jobs, Fn&& fn) {
  if (n <= 0) return;
  if (jobs <= 1 || n == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min(jobs, n);
  for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace graspseq
