// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace qvit {

/// Worker count: QVIT_THREADS when set and positive, else the hardware
/// concurrency (at least 1).
std::size_t thread_budget();

/// Splits [0, n) into at most `threads` contiguous chunks and runs
/// fn(begin, end, worker) on each. Exceptions from workers are rethrown.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t begin, std::size_t end, std::size_t worker)>& fn);

}  // namespace qvit
