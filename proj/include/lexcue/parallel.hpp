#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace lexcue {

/// Runs fn(i) for i in [0, n) with at most `limit` calls in flight.
/// Results must be written by index, so completion order never matters.
/// The first exception thrown by any call is rethrown after all workers join.
template <class Fn>
void bounded_for(std::size_t n, std::size_t limit, Fn&& fn) {
  if (n == 0) return;
  limit = std::clamp<std::size_t>(limit, 1, n);
  if (limit == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(limit);
    for (std::size_t t = 0; t < limit; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace lexcue
