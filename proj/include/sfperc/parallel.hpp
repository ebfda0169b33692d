#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sfperc {

// Runs fn(i) for i in [0, count) on up to `jobs` threads. Each index is
// handled exactly once; callers write results into slot i so the reduction
// order never depends on scheduling. The first exception is rethrown.
template <typename Fn>
void for_each_trial(std::uint64_t count, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, jobs);
  if (jobs == 1 || count < 2) {
    for (std::uint64_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::uint64_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
      }
    }
  };
  std::vector<std::thread> pool;
  const auto threads = static_cast<unsigned>(std::min<std::uint64_t>(jobs, count));
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace sfperc
