// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qvit {

struct AdamOptions {
  double learning_rate = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment estimates and the number of steps taken.
struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected ADAM update, in place. An empty state is sized on first
/// use; any other size disagreement throws DimensionError.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamOptions& options = {});

}  // namespace qvit
