// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "qvit/qsim.hpp"
#include "qvit/tensor.hpp"

namespace qvit::attention {

/// d_h x d_h key/query/value projections, no biases.
struct ClassicalHeadParams {
  Tensor w_k;
  Tensor w_q;
  Tensor w_v;
};

/// Circuit angles: 3*d_h+1 for key and query, 3*d_h for value.
struct HybridHeadParams {
  Tensor theta_k;
  Tensor theta_q;
  Tensor theta_v;
};

enum class GradientMethod { Adjoint, ParameterShift };

struct HybridOptions {
  /// Multiplies every token entry before it is used as an RX angle.
  double angle_scale = 1.0;
  GradientMethod gradient = GradientMethod::Adjoint;
};

/// Runs the loader + `role` circuit on every row of x [tokens x d_h] and
/// returns <Z_0> per row ([tokens x 1]) for key/query, or <Z_j> for every
/// qubit ([tokens x d_h]) for value. Differentiable in x and theta.
Tensor circuit_expectations(const Tensor& x, const Tensor& theta, qsim::Role role, const HybridOptions& options = {});

/// Intermediate quantities of one head evaluation.
struct HeadTrace {
  Tensor scores;   // pre-softmax, before the 1/sqrt(d_h) scaling
  Tensor weights;  // row-stochastic attention
  Tensor values;
  Tensor output;
  Tensor keys;     // hybrid only: [tokens x 1]
  Tensor queries;  // hybrid only: [tokens x 1]
};

HeadTrace classical_head_trace(const Tensor& x, const ClassicalHeadParams& params);
Tensor classical_head(const Tensor& x, const ClassicalHeadParams& params);

HeadTrace hybrid_head_trace(const Tensor& x, const HybridHeadParams& params, const HybridOptions& options = {});
Tensor hybrid_head(const Tensor& x, const HybridHeadParams& params, const HybridOptions& options = {});

/// Splits x [tokens x d_t] into n_h column blocks, runs head h on block h and
/// concatenates the results in head order.
Tensor multi_head(const Tensor& x, std::span<const ClassicalHeadParams> heads);
Tensor multi_head(const Tensor& x, std::span<const HybridHeadParams> heads, const HybridOptions& options = {});

}  // namespace qvit::attention
