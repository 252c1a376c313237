// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "qvit/attention.hpp"

#include <cmath>
#include <string>

#include "qvit/errors.hpp"

namespace qvit::attention {

Tensor circuit_expectations(const Tensor& x, const Tensor& theta, qsim::Role role, const HybridOptions& options) {
  const auto tokens = x.rows();
  const auto d_h = x.cols();
  const auto expected = qsim::param_count(role, d_h);
  if (theta.numel() != expected) {
    throw ConfigError(std::string(qsim::to_string(role)) + " circuit on " + std::to_string(d_h) +
                      " qubits expects " + std::to_string(expected) + " parameters, got " +
                      std::to_string(theta.numel()));
  }
  const auto circuit = qsim::Circuit::for_role(role, d_h);
  const std::size_t width = role == qsim::Role::Value ? d_h : 1;
  const double scale_factor = options.angle_scale;

  auto xv = x.values();
  std::vector<double> angles(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) angles[i] = scale_factor * xv[i];
  std::vector<double> th(theta.values().begin(), theta.values().end());

  std::vector<double> out(tokens * width);
  for (std::size_t t = 0; t < tokens; ++t) {
    std::span<const double> row(angles.data() + t * d_h, d_h);
    auto state = qsim::run(circuit, row, th);
    if (width == 1) {
      out[t] = qsim::expect_z(state, 0);
    } else {
      auto e = qsim::expect_z_all(state);
      std::copy(e.begin(), e.end(), out.begin() + t * width);
    }
  }

  return make_op({tokens, width}, std::move(out), {x, theta},
                 [circuit, angles = std::move(angles), th = std::move(th), tokens, d_h, width, scale_factor,
                  method = options.gradient](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   std::vector<double> weights(d_h, 0.0);
                   for (std::size_t t = 0; t < tokens; ++t) {
                     bool any = false;
                     for (std::size_t j = 0; j < width; ++j) {
                       weights[j] = g[t * width + j];
                       any = any || weights[j] != 0.0;
                     }
                     if (!any) continue;
                     std::span<const double> row(angles.data() + t * d_h, d_h);
                     auto res = method == GradientMethod::Adjoint ? qsim::adjoint_gradient(circuit, th, row, weights)
                                                                  : qsim::shift_gradient(circuit, th, row, weights);
                     if (gi[0])
                       for (std::size_t j = 0; j < d_h; ++j)
                         (*gi[0])[t * d_h + j] += scale_factor * res.gradient.d_x[j];
                     if (gi[1])
                       for (std::size_t p = 0; p < th.size(); ++p) (*gi[1])[p] += res.gradient.d_theta[p];
                   }
                 });
}

namespace {

void require_head_input(const Tensor& x, std::size_t d_h, const char* who) {
  if (x.rank() != 2 || x.cols() != d_h) {
    throw DimensionError(std::string(who) + ": input " + to_string(x.shape()) + " does not have " +
                         std::to_string(d_h) + " columns");
  }
}

HeadTrace attend(Tensor scores, Tensor values, std::size_t d_h) {
  HeadTrace trace;
  trace.scores = std::move(scores);
  trace.weights = softmax_rows(scale(trace.scores, 1.0 / std::sqrt(static_cast<double>(d_h))));
  trace.values = std::move(values);
  trace.output = matmul(trace.weights, trace.values);
  return trace;
}

}  // namespace

HeadTrace classical_head_trace(const Tensor& x, const ClassicalHeadParams& params) {
  const auto d_h = params.w_k.rows();
  require_head_input(x, d_h, "classical_head");
  auto keys = matmul(x, params.w_k);
  auto queries = matmul(x, params.w_q);
  return attend(matmul(keys, transpose(queries)), matmul(x, params.w_v), d_h);
}

Tensor classical_head(const Tensor& x, const ClassicalHeadParams& params) {
  return classical_head_trace(x, params).output;
}

HeadTrace hybrid_head_trace(const Tensor& x, const HybridHeadParams& params, const HybridOptions& options) {
  if (x.rank() != 2) throw DimensionError("hybrid_head: input must be a matrix, got " + to_string(x.shape()));
  const auto d_h = x.cols();
  auto keys = circuit_expectations(x, params.theta_k, qsim::Role::Key, options);
  auto queries = circuit_expectations(x, params.theta_q, qsim::Role::Query, options);
  auto values = circuit_expectations(x, params.theta_v, qsim::Role::Value, options);
  auto trace = attend(pairwise_neg_sq_diff(queries, keys), std::move(values), d_h);
  trace.keys = std::move(keys);
  trace.queries = std::move(queries);
  return trace;
}

Tensor hybrid_head(const Tensor& x, const HybridHeadParams& params, const HybridOptions& options) {
  return hybrid_head_trace(x, params, options).output;
}

namespace {

template <class Params, class HeadFn>
Tensor split_heads(const Tensor& x, std::span<const Params> heads, HeadFn&& head) {
  if (x.rank() != 2) throw DimensionError("multi_head: input must be a matrix, got " + to_string(x.shape()));
  if (heads.empty()) throw ConfigError("multi_head: no heads");
  const auto d_t = x.cols();
  if (d_t % heads.size() != 0) {
    throw ConfigError("multi_head: token length " + std::to_string(d_t) + " is not divisible by " +
                      std::to_string(heads.size()) + " heads");
  }
  const auto d_h = d_t / heads.size();
  if (heads.size() == 1) return head(x, heads[0]);
  std::vector<Tensor> outputs;
  outputs.reserve(heads.size());
  for (std::size_t h = 0; h < heads.size(); ++h) outputs.push_back(head(slice_cols(x, h * d_h, d_h), heads[h]));
  return concat_cols(outputs);
}

}  // namespace

Tensor multi_head(const Tensor& x, std::span<const ClassicalHeadParams> heads) {
  return split_heads(x, heads, [](const Tensor& part, const ClassicalHeadParams& p) { return classical_head(part, p); });
}

Tensor multi_head(const Tensor& x, std::span<const HybridHeadParams> heads, const HybridOptions& options) {
  return split_heads(x, heads,
                     [&](const Tensor& part, const HybridHeadParams& p) { return hybrid_head(part, p, options); });
}

}  // namespace qvit::attention
