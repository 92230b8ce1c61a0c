#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace membrane {

/// Worker cap shared by every parallel loop in the library (0 = hardware).
inline std::size_t& thread_limit() {
  static std::size_t limit = 0;
  return limit;
}

inline std::size_t worker_count(std::size_t jobs) {
  std::size_t hw = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  if (thread_limit() > 0) hw = std::min(hw, thread_limit());
  return std::max<std::size_t>(1, std::min(hw, jobs));
}

/// Runs body(i) for i in [0, count). Jobs must write to disjoint outputs;
/// results are therefore independent of the schedule. The first exception
/// thrown by any job is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::size_t count, Body&& body) {
  const std::size_t workers = worker_count(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace membrane
