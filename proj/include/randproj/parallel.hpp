#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace randproj {

namespace detail {
inline unsigned& thread_override() {
  static unsigned value = 0;
  return value;
}
}  // namespace detail

/// Worker count: `set_thread_count` wins, then `RANDPROJ_THREADS`, then 1.
inline unsigned thread_count() {
  if (detail::thread_override() > 0) {
    return detail::thread_override();
  }
  if (const char* env = std::getenv("RANDPROJ_THREADS"); env != nullptr && *env != '\0') {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) {
      return static_cast<unsigned>(n);
    }
  }
  return 1;
}

inline void set_thread_count(unsigned n) { detail::thread_override() = n; }

/// Runs body(i) for i in [0, n) on contiguous chunks. Each index must only
/// write to its own output slot; results are then independent of the
/// schedule. On failure the exception of the lowest failing index is
/// rethrown, whatever the thread count.
template <class Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      body(i);
    }
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
        for (std::size_t i = begin; i < end; ++i) {
          body(i);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
  for (const auto& error : errors) {
    if (error) {
      std::rethrow_exception(error);
    }
  }
}

}  // namespace randproj
