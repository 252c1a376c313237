// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file
 * Vision-transformer assembly: patching, linear embedding, optional class
 * token, positional table, stacked encoder layers (classical or hybrid),
 * pooling and the sigmoid classifier. Parameters live in one flat buffer
 * (ParameterSet) whose layout is fixed by parameter_layout(); per-sample
 * graphs bind fresh leaf tensors to it (ModelTensors).
 */

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qvit/attention.hpp"
#include "qvit/tensor.hpp"

namespace qvit::model {

enum class Variant { ClassToken, ColumnMax, ColumnMean };
enum class EncoderKind { Classical, Hybrid };

/// "cls", "cmx", "cmn".
std::string_view to_string(Variant variant);
std::string_view to_string(EncoderKind encoder);
Variant parse_variant(std::string_view text);
EncoderKind parse_encoder(std::string_view text);

inline constexpr std::size_t kClassifierHidden = 32;

/// Central crop of the energy grid and the patch grid laid over it.
struct PatchGeometry {
  std::size_t crop_rows = 16;
  std::size_t crop_cols = 32;
  std::size_t grid_rows = 4;
  std::size_t grid_cols = 4;
};

struct ModelConfig {
  PatchGeometry geometry;
  std::size_t d_t = 16;
  std::size_t n_h = 4;
  std::size_t d_ff = 16;
  std::size_t n_l = 5;
  Variant variant = Variant::ColumnMax;
  EncoderKind encoder = EncoderKind::Classical;
  bool positional = true;
  double angle_scale = 1.0;

  std::size_t n_t() const { return geometry.grid_rows * geometry.grid_cols; }
  std::size_t d_i() const {
    return (geometry.crop_rows / geometry.grid_rows) * (geometry.crop_cols / geometry.grid_cols);
  }
  std::size_t d_h() const { return d_t / n_h; }
  /// Rows entering the encoder stack (n_t, plus one for the class token).
  std::size_t sequence_length() const { return n_t() + (variant == Variant::ClassToken ? 1 : 0); }

  /// Throws ConfigError on any inconsistency.
  void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

enum class Init { FanInUniform, Zeros, Angle };

struct ParamSpec {
  std::string name;
  Shape shape;
  Init init;
  std::size_t fan_in = 0;
};

/// Every trainable tensor in its fixed serialization order.
std::vector<ParamSpec> parameter_layout(const ModelConfig& config);

/// Number of trainable scalars actually allocated for `config`.
std::size_t count_params(const ModelConfig& config);

/// Reconciliation of the allocation count against the closed form
/// d_t(33+d_i) + n_l(2 d_ff d_t + d_ff + d_t + per-layer attention) [+ d_t for
/// the class token], which leaves out the classifier's constant 65.
struct ParamAudit {
  std::size_t allocated = 0;
  std::size_t closed_form = 0;
  std::size_t classifier_constant = 2 * kClassifierHidden + 1;
  bool consistent() const { return allocated == closed_form + classifier_constant; }
};
ParamAudit audit_param_count(const ModelConfig& config);

/// Closed-form total including the classifier constant.
std::size_t closed_form_param_count(const ModelConfig& config);

/// classical - hybrid parameter difference for the same hyperparameters.
std::int64_t classical_minus_hybrid(const ModelConfig& config);

class ParameterSet {
 public:
  struct Entry {
    ParamSpec spec;
    std::size_t offset;
  };

  ParameterSet() = default;
  static ParameterSet zeros(const ModelConfig& config);
  /// Fan-in uniform weights and biases, zero class token, angles in [-pi, pi).
  static ParameterSet initialize(const ModelConfig& config, std::uint64_t seed);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  std::span<double> find(std::string_view name);
  std::span<const double> find(std::string_view name) const;

 private:
  std::vector<Entry> entries_;
  std::vector<double> values_;
};

struct LayerTensors {
  std::vector<attention::ClassicalHeadParams> classical_heads;
  std::vector<attention::HybridHeadParams> hybrid_heads;
  Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
};

/// Leaf tensors for one forward pass, bound to a copy of a ParameterSet.
struct ModelTensors {
  Tensor embed_w, embed_b;
  Tensor class_token;  // undefined unless the class-token variant
  std::vector<LayerTensors> layers;
  Tensor clf_w1, clf_b1, clf_w2, clf_b2;
  std::vector<Tensor> all;  // layout order

  static ModelTensors bind(const ModelConfig& config, const ParameterSet& params, bool requires_grad);
  /// Adds every leaf gradient into `out` (flat, layout order).
  void accumulate_grads(std::span<double> out) const;
};

/// rows x cols window centred on a grid stored row-major as grid_rows x grid_cols.
Tensor crop_center(std::span<const float> grid, std::size_t grid_rows, std::size_t grid_cols, std::size_t rows,
                   std::size_t cols);

/// Splits an image into grid_rows x grid_cols equal patches, traversed
/// row-major; each patch flattened row-major into one output row.
Tensor patch_and_flatten(const Tensor& image, std::size_t grid_rows, std::size_t grid_cols);

/// Fixed sinusoidal table: even columns sin(pos / 10000^(2i/d_t)), odd
/// columns the matching cos.
Tensor positional_embedding(std::size_t tokens, std::size_t d_t);

/// Linear(d_t -> d_ff), GELU, Linear(d_ff -> d_t).
Tensor feed_forward(const Tensor& x, const LayerTensors& layer);

using AttentionFn = std::function<Tensor(const Tensor&)>;

/// y = x + MHA(LN(x)); out = y + MLP(LN(y)).
Tensor classical_encoder_layer(const Tensor& x, const AttentionFn& mha, const LayerTensors& layer);
/// out = x + MLP(MHA(LN(x))).
Tensor hybrid_encoder_layer(const Tensor& x, const AttentionFn& mha, const LayerTensors& layer);

struct ForwardOptions {
  attention::GradientMethod gradient = attention::GradientMethod::Adjoint;
};

/// Token matrix after embedding, class token, positional table and every
/// encoder layer.
Tensor encode(const ModelTensors& tensors, const ModelConfig& config, const Tensor& image,
              const ForwardOptions& options = {});
/// Pooled (or extracted) vector fed to the classifier, [1 x d_t].
Tensor pool(const Tensor& encoded, Variant variant);
/// Electron probability, [1 x 1]. `image` is the full energy grid.
Tensor forward(const ModelTensors& tensors, const ModelConfig& config, const Tensor& image,
               const ForwardOptions& options = {});

/// Gradient-free probability for one energy grid.
double predict(const ModelConfig& config, const ParameterSet& params, const Tensor& image);

}  // namespace qvit::model
