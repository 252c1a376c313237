// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "qvit/optim.hpp"

#include <cmath>
#include <string>

#include "qvit/errors.hpp"

namespace qvit {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamOptions& options) {
  const auto n = params.size();
  if (grads.size() != n) {
    throw DimensionError("adam_step: " + std::to_string(n) + " parameters but " + std::to_string(grads.size()) +
                         " gradients");
  }
  if (state.first_moment.empty() && state.second_moment.empty() && state.step == 0) {
    state.first_moment.assign(n, 0.0);
    state.second_moment.assign(n, 0.0);
  }
  if (state.first_moment.size() != n || state.second_moment.size() != n) {
    throw DimensionError("adam_step: optimizer state holds " + std::to_string(state.first_moment.size()) +
                         " moments for " + std::to_string(n) + " parameters");
  }
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(options.beta1, t);
  const double bias2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = options.beta1 * m + (1.0 - options.beta1) * grads[i];
    v = options.beta2 * v + (1.0 - options.beta2) * grads[i] * grads[i];
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
  }
}

}  // namespace qvit
