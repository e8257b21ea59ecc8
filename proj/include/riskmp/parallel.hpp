#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace riskmp {

/// Worker count for path-parallel loops. Every parallel loop in the library
/// writes per-path outputs only; reductions happen afterwards in path order.
struct Execution {
  std::size_t threads = 1;
};

/// Runs `body(begin, end)` over contiguous chunks of [0, n). If chunks throw,
/// the exception from the lowest chunk is rethrown, which keeps error reports
/// independent of scheduling.
template <class Body>
void parallel_for(std::size_t n, const Execution& exec, Body&& body) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(exec.threads, n));
  if (workers == 1) {
    if (n > 0) body(std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        if (begin < end) body(begin, end);
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

}  // namespace riskmp
