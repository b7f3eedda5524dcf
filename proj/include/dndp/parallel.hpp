#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace dndp {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first exception
/// thrown by any task is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(threads, n); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace dndp
