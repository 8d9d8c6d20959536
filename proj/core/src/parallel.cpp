// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#include "survscan/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace survscan {

namespace {
std::atomic<unsigned> g_max_threads{0};

unsigned resolved_threads() {
  unsigned n = g_max_threads.load(std::memory_order_relaxed);
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  return n;
}
}  // namespace

void set_max_threads(unsigned n) {
  g_max_threads.store(n, std::memory_order_relaxed);
}

unsigned max_threads() { return resolved_threads(); }

namespace detail {

void parallel_for_impl(std::size_t n,
                       const std::function<void(std::size_t, std::size_t)>& chunk) {
  const unsigned workers = resolved_threads();
  constexpr std::size_t kSerialCutoff = 2048;
  if (workers <= 1 || n < kSerialCutoff) {
    chunk(0, n);
    return;
  }

  const std::size_t parts = std::min<std::size_t>(workers, n);
  const std::size_t per = (n + parts - 1) / parts;
  std::vector<std::thread> pool;
  pool.reserve(parts - 1);
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto run = [&](std::size_t begin, std::size_t end) {
    try {
      chunk(begin, end);
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  };

  for (std::size_t p = 1; p < parts; ++p) {
    const std::size_t begin = p * per;
    const std::size_t end = std::min(n, begin + per);
    if (begin >= end) break;
    pool.emplace_back(run, begin, end);
  }
  run(0, std::min(per, n));
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

}  // namespace survscan
