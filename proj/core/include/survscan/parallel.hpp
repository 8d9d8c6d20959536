// Copyright Contributors to the survscan Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace survscan {

/// Caps the worker count used by parallel_for. 0 restores the hardware default.
void set_max_threads(unsigned n);
unsigned max_threads();

namespace detail {
void parallel_for_impl(std::size_t n,
                       const std::function<void(std::size_t, std::size_t)>& chunk);
}

/// Runs f(i) for every i in [0, n), split into contiguous chunks across the
/// configured workers. f must be safe to call concurrently for distinct i.
/// Callers only ever write results indexed by i, so output is identical to a
/// serial loop regardless of thread count.
template <typename F>
void parallel_for(std::size_t n, F&& f) {
  detail::parallel_for_impl(n, [&f](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) f(i);
  });
}

}  // namespace survscan
