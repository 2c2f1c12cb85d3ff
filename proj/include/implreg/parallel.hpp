#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace implreg {

namespace detail {
inline std::atomic<unsigned>& worker_thread_setting() {
  static std::atomic<unsigned> threads{1};
  return threads;
}
}  // namespace detail

/// Number of worker threads used by parallel_for. Results never depend on it.
inline unsigned worker_threads() { return detail::worker_thread_setting().load(); }

inline void set_worker_threads(unsigned threads) {
  detail::worker_thread_setting().store(std::max(1u, threads));
}

/// Runs body(i) for i in [0, count). Tasks write to disjoint, index-addressed
/// slots; reductions happen afterwards in index order. If several tasks
/// throw, the exception of the lowest index is rethrown.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
  const unsigned threads =
      static_cast<unsigned>(std::min<std::size_t>(worker_threads(), count));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace implreg
