// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file
 * Dense row-major tensors with tape-free reverse-mode differentiation.
 *
 * Every operation returns a new Tensor whose node remembers its inputs and a
 * local gradient rule. backward() walks the graph reachable from a scalar in
 * reverse topological order and accumulates gradients into every node that
 * requires them. Graphs are built per sample and are not shared between
 * threads.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace qvit {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Local gradient rule of an operation. `out_grad` is dL/d(output);
/// `in_grads[i]` is the accumulation buffer of input i, or nullptr when that
/// input does not require a gradient.
using BackwardFn =
    std::function<void(std::span<const double> out_grad, std::span<std::vector<double>* const> in_grads)>;

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  /// Rank-2 helpers; throw DimensionError on other ranks.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  double operator()(std::size_t row, std::size_t col) const;
  double operator[](std::size_t flat) const { return values()[flat]; }
  /// Value of a one-element tensor.
  double item() const;

  bool requires_grad() const;
  bool has_grad() const;
  /// Accumulated gradient; empty span when none has been accumulated.
  std::span<const double> grad() const;
  void zero_grad();

  /// Direct inputs of the operation that produced this tensor.
  std::vector<Tensor> inputs() const;
  bool is_leaf() const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

  friend Tensor make_op(Shape, std::vector<double>, std::vector<Tensor>, BackwardFn);
  friend void backward(const Tensor&);
  friend struct ComputationRecord;

  std::shared_ptr<detail::Node> node_;
};

/// Creates the result of a custom differentiable operation. The result
/// requires a gradient iff any input does; `fn` is dropped otherwise.
Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, BackwardFn fn);

/// Ordered view of the graph reachable from a root: every node appears after
/// all of its inputs.
struct ComputationRecord {
  static ComputationRecord of(const Tensor& root);
  std::vector<Tensor> nodes;
};

/// Reverse-mode sweep from a one-element tensor. Interior gradients are reset;
/// leaf gradients accumulate across calls.
void backward(const Tensor& loss);

// Primitive operations. Matrices are rank-2 [rows x cols].

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
/// a[m x n] + bias broadcast over rows; bias has n elements.
Tensor add_row_vector(const Tensor& a, const Tensor& bias);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor softmax_rows(const Tensor& a);
inline constexpr double kLayerNormEpsilon = 1e-5;
Tensor layer_norm(const Tensor& a);

Tensor gelu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = 0.01);
Tensor sigmoid(const Tensor& a);

inline constexpr double kProbabilityClamp = 1e-7;
/// Mean binary cross-entropy. Labels must be exactly 0 or 1.
Tensor bce_loss(const Tensor& p, const Tensor& y);

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor select_row(const Tensor& a, std::size_t row);
Tensor column_max(const Tensor& a);
Tensor column_mean(const Tensor& a);

/// A[i][j] = -(q_i - k_j)^2 for column vectors q, k of equal length.
Tensor pairwise_neg_sq_diff(const Tensor& q, const Tensor& k);

}  // namespace qvit
