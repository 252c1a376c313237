// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "qvit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "qvit/errors.hpp"

namespace qvit {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

}  // namespace detail

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_values(const Shape& shape, std::size_t n) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor shape " + to_string(shape) + " has a zero dimension");
  }
  if (numel(shape) != n) {
    throw DimensionError("tensor shape " + to_string(shape) + " does not match " + std::to_string(n) +
                         " values");
  }
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " + to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
  }
}

// Elementwise unary op with derivative f'(x) evaluated from (x, y).
template <class F, class DF>
Tensor unary(const Tensor& a, F f, DF df) {
  auto x = a.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  std::vector<double> in(x.begin(), x.end());
  auto y = out;
  return make_op(a.shape(), std::move(out), {a},
                 [in = std::move(in), y = std::move(y), df](std::span<const double> g,
                                                            std::span<std::vector<double>* const> gi) {
                   auto& ga = *gi[0];
                   for (std::size_t i = 0; i < in.size(); ++i) ga[i] += g[i] * df(in[i], y[i]);
                 });
}

}  // namespace

Tensor Tensor::leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  check_values(shape, values.size());
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = qvit::numel(shape);
  return leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) { return leaf({}, {value}, requires_grad); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values, bool requires_grad) {
  return leaf({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  auto n = values.size();
  return leaf({n}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
  require_matrix(*this, "rows");
  return node_->shape[0];
}

std::size_t Tensor::cols() const {
  require_matrix(*this, "cols");
  return node_->shape[1];
}

std::span<const double> Tensor::values() const { return node_->value; }

double Tensor::operator()(std::size_t row, std::size_t col) const {
  return node_->value[row * cols() + col];
}

double Tensor::item() const {
  if (numel() != 1) throw DimensionError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
void Tensor::zero_grad() { node_->grad.clear(); }
bool Tensor::is_leaf() const { return node_->inputs.empty(); }

std::vector<Tensor> Tensor::inputs() const {
  std::vector<Tensor> out;
  out.reserve(node_->inputs.size());
  for (const auto& n : node_->inputs) out.push_back(Tensor(n));
  return out;
}

Tensor make_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs, BackwardFn fn) {
  check_values(shape, values.size());
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  for (const auto& in : inputs) node->requires_grad = node->requires_grad || in.requires_grad();
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(std::move(in.node_));
    node->backward = std::move(fn);
  }
  return Tensor(std::move(node));
}

ComputationRecord ComputationRecord::of(const Tensor& root) {
  ComputationRecord record;
  std::unordered_set<const detail::Node*> visited;
  // Iterative post-order DFS; a node is emitted once all inputs are emitted.
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(root.node_, 0);
  visited.insert(root.node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      auto child = node->inputs[next++];
      if (visited.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
    } else {
      record.nodes.push_back(Tensor(node));
      stack.pop_back();
    }
  }
  return record;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ValidationError("backward() requires a one-element loss, got shape " +
                          (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) return;
  auto record = ComputationRecord::of(loss);
  for (auto& t : record.nodes) {
    auto& node = *t.node_;
    if (!node.inputs.empty()) node.grad.assign(node.value.size(), 0.0);
  }
  auto& root = *loss.node_;
  if (root.grad.empty()) root.grad.assign(1, 0.0);
  root.grad[0] += 1.0;

  std::vector<std::vector<double>*> slots;
  for (auto it = record.nodes.rbegin(); it != record.nodes.rend(); ++it) {
    auto& node = *it->node_;
    if (!node.backward) continue;
    slots.clear();
    for (auto& in : node.inputs) {
      if (in->requires_grad) {
        if (in->grad.empty()) in->grad.assign(in->value.size(), 0.0);
        slots.push_back(&in->grad);
      } else {
        slots.push_back(nullptr);
      }
    }
    node.backward(node.grad, slots);
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const auto m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  auto av = a.values(), bv = b.values();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  return make_op({m, n}, std::move(out), {a, b},
                 [a, b, m, k, n](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   auto av = a.values(), bv = b.values();
                   if (gi[0]) {
                     auto& ga = *gi[0];
                     for (std::size_t i = 0; i < m; ++i)
                       for (std::size_t p = 0; p < k; ++p) {
                         double s = 0.0;
                         for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bv[p * n + j];
                         ga[i * k + p] += s;
                       }
                   }
                   if (gi[1]) {
                     auto& gb = *gi[1];
                     for (std::size_t i = 0; i < m; ++i)
                       for (std::size_t p = 0; p < k; ++p) {
                         const double aip = av[i * k + p];
                         for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
                       }
                   }
                 });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const auto m = a.rows(), n = a.cols();
  auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_op({n, m}, std::move(out), {a},
                 [m, n](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   auto& ga = *gi[0];
                   for (std::size_t i = 0; i < m; ++i)
                     for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
                 });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_op(a.shape(), std::move(out), {a, b},
                 [](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   for (auto* slot : gi) {
                     if (!slot) continue;
                     for (std::size_t i = 0; i < g.size(); ++i) (*slot)[i] += g[i];
                   }
                 });
}

Tensor add_row_vector(const Tensor& a, const Tensor& bias) {
  require_matrix(a, "add_row_vector");
  const auto m = a.rows(), n = a.cols();
  if (bias.numel() != n) {
    throw DimensionError("add_row_vector: bias " + to_string(bias.shape()) + " does not fit " +
                         to_string(a.shape()));
  }
  auto av = a.values(), bv = bias.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = av[i * n + j] + bv[j];
  return make_op({m, n}, std::move(out), {a, bias},
                 [m, n](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   if (gi[0])
                     for (std::size_t i = 0; i < m * n; ++i) (*gi[0])[i] += g[i];
                   if (gi[1])
                     for (std::size_t i = 0; i < m; ++i)
                       for (std::size_t j = 0; j < n; ++j) (*gi[1])[j] += g[i * n + j];
                 });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return make_op(a.shape(), std::move(out), {a, b},
                 [a, b](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   auto av = a.values(), bv = b.values();
                   if (gi[0])
                     for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * bv[i];
                   if (gi[1])
                     for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * av[i];
                 });
}

Tensor scale(const Tensor& a, double factor) {
  auto av = a.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * factor;
  return make_op(a.shape(), std::move(out), {a},
                 [factor](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * factor;
                 });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return make_op({}, {s}, {a}, [](std::span<const double> g, std::span<std::vector<double>* const> gi) {
    for (auto& v : *gi[0]) v += g[0];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw DimensionError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  auto av = a.values();
  return make_op(std::move(shape), std::vector<double>(av.begin(), av.end()), {a},
                 [](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
                 });
}

Tensor softmax_rows(const Tensor& a) {
  require_matrix(a, "softmax_rows");
  const auto m = a.rows(), n = a.cols();
  auto av = a.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = av.data() + i * n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (std::isnan(row[j])) throw NumericError("softmax_rows: NaN in row " + std::to_string(i));
      mx = std::max(mx, row[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += (out[i * n + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  auto y = out;
  return make_op({m, n}, std::move(out), {a},
                 [y = std::move(y), m, n](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   auto& ga = *gi[0];
                   for (std::size_t i = 0; i < m; ++i) {
                     double dot = 0.0;
                     for (std::size_t j = 0; j < n; ++j) dot += y[i * n + j] * g[i * n + j];
                     for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dot);
                   }
                 });
}

Tensor layer_norm(const Tensor& a) {
  require_matrix(a, "layer_norm");
  const auto m = a.rows(), n = a.cols();
  if (n < 2) throw DimensionError("layer_norm: rows need at least 2 entries, got " + to_string(a.shape()));
  auto av = a.values();
  std::vector<double> out(m * n), inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = av.data() + i * n;
    double mean = 0.0;
    for (std::size_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = (row[j] - mean) * inv_std[i];
  }
  auto y = out;
  return make_op({m, n}, std::move(out), {a},
                 [y = std::move(y), inv_std = std::move(inv_std), m, n](
                     std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   auto& ga = *gi[0];
                   const double inv_n = 1.0 / static_cast<double>(n);
                   for (std::size_t i = 0; i < m; ++i) {
                     double mean_g = 0.0, mean_gy = 0.0;
                     for (std::size_t j = 0; j < n; ++j) {
                       mean_g += g[i * n + j];
                       mean_gy += g[i * n + j] * y[i * n + j];
                     }
                     mean_g *= inv_n;
                     mean_gy *= inv_n;
                     for (std::size_t j = 0; j < n; ++j)
                       ga[i * n + j] += inv_std[i] * (g[i * n + j] - mean_g - y[i * n + j] * mean_gy);
                   }
                 });
}

Tensor gelu(const Tensor& a) {
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); },
      [](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + x * pdf;
      });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor bce_loss(const Tensor& p, const Tensor& y) {
  if (p.numel() != y.numel()) {
    throw DimensionError("bce_loss: " + to_string(p.shape()) + " predictions vs " + to_string(y.shape()) +
                         " labels");
  }
  auto pv = p.values(), yv = y.values();
  const std::size_t m = pv.size();
  std::vector<double> clamped(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (yv[i] != 0.0 && yv[i] != 1.0) {
      throw ValidationError("bce_loss: label " + std::to_string(yv[i]) + " at index " + std::to_string(i) +
                            " is not 0 or 1");
    }
    if (std::isnan(pv[i])) throw NumericError("bce_loss: NaN prediction at index " + std::to_string(i));
    clamped[i] = std::clamp(pv[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= yv[i] * std::log(clamped[i]) + (1.0 - yv[i]) * std::log(1.0 - clamped[i]);
  }
  std::vector<double> labels(yv.begin(), yv.end());
  // The clamp is straight-through: saturated predictions still receive the
  // gradient evaluated at the clamped probability.
  return make_op({}, {total / static_cast<double>(m)}, {p, y},
                 [clamped = std::move(clamped), labels = std::move(labels)](
                     std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   if (!gi[0]) return;
                   const double inv_m = 1.0 / static_cast<double>(clamped.size());
                   for (std::size_t i = 0; i < clamped.size(); ++i) {
                     const double q = clamped[i];
                     (*gi[0])[i] += g[0] * inv_m * (-labels[i] / q + (1.0 - labels[i]) / (1.0 - q));
                   }
                 });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  require_matrix(a, "slice_cols");
  const auto m = a.rows(), n = a.cols();
  if (count == 0 || begin + count > n) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") out of range for " + to_string(a.shape()));
  }
  auto av = a.values();
  std::vector<double> out(m * count);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < count; ++j) out[i * count + j] = av[i * n + begin + j];
  return make_op({m, count}, std::move(out), {a},
                 [m, n, begin, count](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   auto& ga = *gi[0];
                   for (std::size_t i = 0; i < m; ++i)
                     for (std::size_t j = 0; j < count; ++j) ga[i * n + begin + j] += g[i * count + j];
                 });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const auto m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t n = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) {
      throw DimensionError("concat_cols: row count mismatch " + to_string(parts[0].shape()) + " vs " +
                           to_string(p.shape()));
    }
    widths.push_back(p.cols());
    n += p.cols();
  }
  std::vector<double> out(m * n);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    auto pv = p.values();
    const auto w = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) out[i * n + offset + j] = pv[i * w + j];
    offset += w;
  }
  return make_op({m, n}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                 [widths = std::move(widths), m, n](std::span<const double> g,
                                                     std::span<std::vector<double>* const> gi) {
                   std::size_t offset = 0;
                   for (std::size_t k = 0; k < widths.size(); ++k) {
                     const auto w = widths[k];
                     if (gi[k])
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < w; ++j) (*gi[k])[i * w + j] += g[i * n + offset + j];
                     offset += w;
                   }
                 });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const auto n = parts[0].cols();
  std::vector<double> out;
  std::vector<std::size_t> sizes;
  for (const auto& p : parts) {
    if (p.cols() != n) {
      throw DimensionError("concat_rows: column count mismatch " + to_string(parts[0].shape()) + " vs " +
                           to_string(p.shape()));
    }
    auto pv = p.values();
    out.insert(out.end(), pv.begin(), pv.end());
    sizes.push_back(pv.size());
  }
  const auto m = out.size() / n;
  return make_op({m, n}, std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                 [sizes = std::move(sizes)](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   std::size_t offset = 0;
                   for (std::size_t k = 0; k < sizes.size(); ++k) {
                     if (gi[k])
                       for (std::size_t i = 0; i < sizes[k]; ++i) (*gi[k])[i] += g[offset + i];
                     offset += sizes[k];
                   }
                 });
}

Tensor select_row(const Tensor& a, std::size_t row) {
  require_matrix(a, "select_row");
  const auto m = a.rows(), n = a.cols();
  if (row >= m) throw DimensionError("select_row: row " + std::to_string(row) + " of " + to_string(a.shape()));
  auto av = a.values();
  return make_op({1, n}, std::vector<double>(av.begin() + row * n, av.begin() + (row + 1) * n), {a},
                 [row, n](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   for (std::size_t j = 0; j < n; ++j) (*gi[0])[row * n + j] += g[j];
                 });
}

Tensor column_max(const Tensor& a) {
  require_matrix(a, "column_max");
  const auto m = a.rows(), n = a.cols();
  auto av = a.values();
  std::vector<double> out(n);
  std::vector<std::size_t> argmax(n, 0);
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = av[j];
    for (std::size_t i = 1; i < m; ++i) {
      if (av[i * n + j] > out[j]) {
        out[j] = av[i * n + j];
        argmax[j] = i;
      }
    }
  }
  return make_op({1, n}, std::move(out), {a},
                 [argmax = std::move(argmax), n](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   for (std::size_t j = 0; j < n; ++j) (*gi[0])[argmax[j] * n + j] += g[j];
                 });
}

Tensor column_mean(const Tensor& a) {
  require_matrix(a, "column_mean");
  const auto m = a.rows(), n = a.cols();
  auto av = a.values();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += av[i * n + j];
  for (auto& v : out) v /= static_cast<double>(m);
  return make_op({1, n}, std::move(out), {a},
                 [m, n](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   const double inv_m = 1.0 / static_cast<double>(m);
                   for (std::size_t i = 0; i < m; ++i)
                     for (std::size_t j = 0; j < n; ++j) (*gi[0])[i * n + j] += g[j] * inv_m;
                 });
}

Tensor pairwise_neg_sq_diff(const Tensor& q, const Tensor& k) {
  if (q.numel() != k.numel()) {
    throw DimensionError("pairwise_neg_sq_diff: " + to_string(q.shape()) + " vs " + to_string(k.shape()));
  }
  const auto m = q.numel();
  auto qv = q.values(), kv = k.values();
  std::vector<double> out(m * m), diff(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      diff[i * m + j] = qv[i] - kv[j];
      out[i * m + j] = -diff[i * m + j] * diff[i * m + j];
    }
  return make_op({m, m}, std::move(out), {q, k},
                 [diff = std::move(diff), m](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   for (std::size_t i = 0; i < m; ++i)
                     for (std::size_t j = 0; j < m; ++j) {
                       const double t = 2.0 * g[i * m + j] * diff[i * m + j];
                       if (gi[0]) (*gi[0])[i] -= t;
                       if (gi[1]) (*gi[1])[j] += t;
                     }
                 });
}

}  // namespace qvit
