// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "qvit/model.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "qvit/errors.hpp"

namespace qvit::model {

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::ClassToken:
      return "cls";
    case Variant::ColumnMax:
      return "cmx";
    case Variant::ColumnMean:
      return "cmn";
  }
  return "?";
}

std::string_view to_string(EncoderKind encoder) {
  return encoder == EncoderKind::Classical ? "classical" : "hybrid";
}

Variant parse_variant(std::string_view text) {
  if (text == "cls" || text == "class_token") return Variant::ClassToken;
  if (text == "cmx" || text == "column_max") return Variant::ColumnMax;
  if (text == "cmn" || text == "column_mean") return Variant::ColumnMean;
  throw ConfigError("unknown model variant '" + std::string(text) + "'");
}

EncoderKind parse_encoder(std::string_view text) {
  if (text == "classical") return EncoderKind::Classical;
  if (text == "hybrid") return EncoderKind::Hybrid;
  throw ConfigError("unknown encoder kind '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  const auto& g = geometry;
  if (g.grid_rows == 0 || g.grid_cols == 0 || g.crop_rows == 0 || g.crop_cols == 0) {
    throw ConfigError("patch geometry has a zero extent");
  }
  if (g.crop_rows % g.grid_rows != 0 || g.crop_cols % g.grid_cols != 0) {
    throw ConfigError("a " + std::to_string(g.crop_rows) + "x" + std::to_string(g.crop_cols) +
                      " crop cannot be split into a " + std::to_string(g.grid_rows) + "x" +
                      std::to_string(g.grid_cols) + " grid of equal patches");
  }
  if (n_h == 0 || d_t == 0 || d_t % n_h != 0) {
    throw ConfigError("token length " + std::to_string(d_t) + " is not divisible by " + std::to_string(n_h) +
                      " heads");
  }
  if (d_t < 2) throw ConfigError("token length must be at least 2 for layer normalization");
  if (d_ff == 0) throw ConfigError("feed-forward width must be positive");
  if (encoder == EncoderKind::Hybrid && d_h() > 12) {
    throw ConfigError("hybrid heads above 12 qubits are not supported");
  }
  if (!std::isfinite(angle_scale)) throw ConfigError("angle scale must be finite");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"crop_rows", c.geometry.crop_rows}, {"crop_cols", c.geometry.crop_cols},
      {"grid_rows", c.geometry.grid_rows}, {"grid_cols", c.geometry.grid_cols},
      {"n_t", c.n_t()},                    {"d_i", c.d_i()},
      {"d_t", c.d_t},                      {"n_h", c.n_h},
      {"d_h", c.d_h()},                    {"d_ff", c.d_ff},
      {"n_l", c.n_l},                      {"variant", to_string(c.variant)},
      {"encoder", to_string(c.encoder)},   {"positional", c.positional},
      {"angle_scale", c.angle_scale},
  };
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.geometry.crop_rows = j.value("crop_rows", c.geometry.crop_rows);
    c.geometry.crop_cols = j.value("crop_cols", c.geometry.crop_cols);
    c.geometry.grid_rows = j.value("grid_rows", c.geometry.grid_rows);
    c.geometry.grid_cols = j.value("grid_cols", c.geometry.grid_cols);
    c.d_t = j.value("d_t", c.d_t);
    c.n_h = j.value("n_h", c.n_h);
    c.d_ff = j.value("d_ff", c.d_ff);
    c.n_l = j.value("n_l", c.n_l);
    c.variant = parse_variant(j.value("variant", std::string(to_string(c.variant))));
    c.encoder = parse_encoder(j.value("encoder", std::string(to_string(c.encoder))));
    c.positional = j.value("positional", c.positional);
    c.angle_scale = j.value("angle_scale", c.angle_scale);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<ParamSpec> parameter_layout(const ModelConfig& config) {
  config.validate();
  const auto d_t = config.d_t, d_h = config.d_h(), d_ff = config.d_ff, d_i = config.d_i();
  std::vector<ParamSpec> layout;
  layout.push_back({"embed.weight", {d_i, d_t}, Init::FanInUniform, d_i});
  layout.push_back({"embed.bias", {d_t}, Init::FanInUniform, d_i});
  if (config.variant == Variant::ClassToken) layout.push_back({"class_token", {1, d_t}, Init::Zeros, 0});
  for (std::size_t l = 0; l < config.n_l; ++l) {
    const auto prefix = "layer" + std::to_string(l) + ".";
    for (std::size_t h = 0; h < config.n_h; ++h) {
      const auto head = prefix + "head" + std::to_string(h) + ".";
      if (config.encoder == EncoderKind::Classical) {
        for (const char* w : {"w_k", "w_q", "w_v"}) layout.push_back({head + w, {d_h, d_h}, Init::FanInUniform, d_h});
      } else {
        layout.push_back({head + "theta_k", {qsim::param_count(qsim::Role::Key, d_h)}, Init::Angle, 0});
        layout.push_back({head + "theta_q", {qsim::param_count(qsim::Role::Query, d_h)}, Init::Angle, 0});
        layout.push_back({head + "theta_v", {qsim::param_count(qsim::Role::Value, d_h)}, Init::Angle, 0});
      }
    }
    layout.push_back({prefix + "mlp.w1", {d_t, d_ff}, Init::FanInUniform, d_t});
    layout.push_back({prefix + "mlp.b1", {d_ff}, Init::FanInUniform, d_t});
    layout.push_back({prefix + "mlp.w2", {d_ff, d_t}, Init::FanInUniform, d_ff});
    layout.push_back({prefix + "mlp.b2", {d_t}, Init::FanInUniform, d_ff});
  }
  layout.push_back({"classifier.w1", {d_t, kClassifierHidden}, Init::FanInUniform, d_t});
  layout.push_back({"classifier.b1", {kClassifierHidden}, Init::FanInUniform, d_t});
  layout.push_back({"classifier.w2", {kClassifierHidden, 1}, Init::FanInUniform, kClassifierHidden});
  layout.push_back({"classifier.b2", {1}, Init::FanInUniform, kClassifierHidden});
  return layout;
}

std::size_t count_params(const ModelConfig& config) {
  std::size_t total = 0;
  for (const auto& spec : parameter_layout(config)) total += numel(spec.shape);
  return total;
}

ParamAudit audit_param_count(const ModelConfig& config) {
  config.validate();
  const auto d_t = config.d_t, d_i = config.d_i(), d_ff = config.d_ff, n_h = config.n_h, d_h = config.d_h();
  const auto attention = config.encoder == EncoderKind::Classical ? 3 * n_h * d_h * d_h : n_h * (9 * d_h + 2);
  ParamAudit audit;
  audit.allocated = count_params(config);
  audit.closed_form = d_t * (33 + d_i) + config.n_l * (2 * d_ff * d_t + d_ff + d_t + attention);
  if (config.variant == Variant::ClassToken) audit.closed_form += d_t;
  return audit;
}

std::size_t closed_form_param_count(const ModelConfig& config) {
  const auto audit = audit_param_count(config);
  return audit.closed_form + audit.classifier_constant;
}

std::int64_t classical_minus_hybrid(const ModelConfig& config) {
  const auto n_l = static_cast<std::int64_t>(config.n_l), d_t = static_cast<std::int64_t>(config.d_t),
             d_h = static_cast<std::int64_t>(config.d_h()), n_h = static_cast<std::int64_t>(config.n_h);
  return n_l * (d_t * (3 * d_h - 9) - 2 * n_h);
}

ParameterSet ParameterSet::zeros(const ModelConfig& config) {
  ParameterSet set;
  std::size_t offset = 0;
  for (auto& spec : parameter_layout(config)) {
    const auto n = numel(spec.shape);
    set.entries_.push_back({std::move(spec), offset});
    offset += n;
  }
  set.values_.assign(offset, 0.0);
  return set;
}

ParameterSet ParameterSet::initialize(const ModelConfig& config, std::uint64_t seed) {
  auto set = zeros(config);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (const auto& e : set.entries_) {
    const auto n = numel(e.spec.shape);
    double bound = 0.0;
    switch (e.spec.init) {
      case Init::FanInUniform:
        bound = 1.0 / std::sqrt(static_cast<double>(e.spec.fan_in));
        break;
      case Init::Angle:
        bound = std::numbers::pi;
        break;
      case Init::Zeros:
        continue;
    }
    for (std::size_t i = 0; i < n; ++i) set.values_[e.offset + i] = bound * unit(rng);
  }
  return set;
}

std::span<double> ParameterSet::find(std::string_view name) {
  for (const auto& e : entries_) {
    if (e.spec.name == name) return {values_.data() + e.offset, numel(e.spec.shape)};
  }
  throw ValidationError("no parameter named '" + std::string(name) + "'");
}

std::span<const double> ParameterSet::find(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->find(name);
}

ModelTensors ModelTensors::bind(const ModelConfig& config, const ParameterSet& params, bool requires_grad) {
  const auto layout = parameter_layout(config);
  if (layout.size() != params.entries().size() || count_params(config) != params.size()) {
    throw ConfigError("parameter set does not match the model configuration");
  }
  ModelTensors t;
  t.all.reserve(layout.size());
  auto values = params.values();
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& e = params.entries()[i];
    if (e.spec.name != layout[i].name || e.spec.shape != layout[i].shape) {
      throw ConfigError("parameter '" + e.spec.name + "' does not match the model layout");
    }
    const auto n = numel(e.spec.shape);
    t.all.push_back(Tensor::leaf(e.spec.shape,
                                 std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>(e.offset),
                                                     values.begin() + static_cast<std::ptrdiff_t>(e.offset + n)),
                                 requires_grad));
  }
  std::size_t k = 0;
  auto next = [&] { return t.all[k++]; };
  t.embed_w = next();
  t.embed_b = next();
  if (config.variant == Variant::ClassToken) t.class_token = next();
  t.layers.resize(config.n_l);
  for (auto& layer : t.layers) {
    for (std::size_t h = 0; h < config.n_h; ++h) {
      if (config.encoder == EncoderKind::Classical) {
        attention::ClassicalHeadParams p;
        p.w_k = next();
        p.w_q = next();
        p.w_v = next();
        layer.classical_heads.push_back(std::move(p));
      } else {
        attention::HybridHeadParams p;
        p.theta_k = next();
        p.theta_q = next();
        p.theta_v = next();
        layer.hybrid_heads.push_back(std::move(p));
      }
    }
    layer.mlp_w1 = next();
    layer.mlp_b1 = next();
    layer.mlp_w2 = next();
    layer.mlp_b2 = next();
  }
  t.clf_w1 = next();
  t.clf_b1 = next();
  t.clf_w2 = next();
  t.clf_b2 = next();
  return t;
}

void ModelTensors::accumulate_grads(std::span<double> out) const {
  std::size_t offset = 0;
  for (const auto& t : all) {
    auto g = t.grad();
    if (!g.empty()) {
      for (std::size_t i = 0; i < g.size(); ++i) out[offset + i] += g[i];
    }
    offset += t.numel();
  }
  if (offset != out.size()) throw DimensionError("gradient buffer does not match the parameter count");
}

Tensor crop_center(std::span<const float> grid, std::size_t grid_rows, std::size_t grid_cols, std::size_t rows,
                   std::size_t cols) {
  if (grid.size() != grid_rows * grid_cols) throw DimensionError("crop_center: grid size mismatch");
  if (rows > grid_rows || cols > grid_cols) {
    throw ConfigError("crop " + std::to_string(rows) + "x" + std::to_string(cols) + " exceeds grid " +
                      std::to_string(grid_rows) + "x" + std::to_string(grid_cols));
  }
  const auto r0 = (grid_rows - rows) / 2, c0 = (grid_cols - cols) / 2;
  std::vector<double> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[i * cols + j] = grid[(r0 + i) * grid_cols + c0 + j];
  return Tensor::matrix(rows, cols, std::move(out));
}

Tensor patch_and_flatten(const Tensor& image, std::size_t grid_rows, std::size_t grid_cols) {
  if (image.rank() != 2) throw DimensionError("patch_and_flatten: image must be a matrix");
  const auto h = image.rows(), w = image.cols();
  if (grid_rows == 0 || grid_cols == 0 || h % grid_rows != 0 || w % grid_cols != 0) {
    throw ConfigError("a " + std::to_string(h) + "x" + std::to_string(w) + " image cannot be split into " +
                      std::to_string(grid_rows) + "x" + std::to_string(grid_cols) + " equal patches");
  }
  const auto ph = h / grid_rows, pw = w / grid_cols, d_i = ph * pw, n_t = grid_rows * grid_cols;
  // source[k] is the flat image index that lands at flat output index k.
  std::vector<std::size_t> source(n_t * d_i);
  for (std::size_t pr = 0; pr < grid_rows; ++pr)
    for (std::size_t pc = 0; pc < grid_cols; ++pc)
      for (std::size_t i = 0; i < ph; ++i)
        for (std::size_t j = 0; j < pw; ++j)
          source[(pr * grid_cols + pc) * d_i + i * pw + j] = (pr * ph + i) * w + pc * pw + j;
  auto iv = image.values();
  std::vector<double> out(source.size());
  for (std::size_t k = 0; k < source.size(); ++k) out[k] = iv[source[k]];
  return make_op({n_t, d_i}, std::move(out), {image},
                 [source = std::move(source)](std::span<const double> g, std::span<std::vector<double>* const> gi) {
                   for (std::size_t k = 0; k < source.size(); ++k) (*gi[0])[source[k]] += g[k];
                 });
}

Tensor positional_embedding(std::size_t tokens, std::size_t d_t) {
  std::vector<double> table(tokens * d_t);
  for (std::size_t pos = 0; pos < tokens; ++pos) {
    for (std::size_t c = 0; c < d_t; ++c) {
      const auto pair = static_cast<double>(c / 2 * 2);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, pair / static_cast<double>(d_t));
      table[pos * d_t + c] = (c % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::matrix(tokens, d_t, std::move(table));
}

Tensor feed_forward(const Tensor& x, const LayerTensors& layer) {
  auto hidden = gelu(add_row_vector(matmul(x, layer.mlp_w1), layer.mlp_b1));
  return add_row_vector(matmul(hidden, layer.mlp_w2), layer.mlp_b2);
}

Tensor classical_encoder_layer(const Tensor& x, const AttentionFn& mha, const LayerTensors& layer) {
  auto y = add(x, mha(layer_norm(x)));
  return add(y, feed_forward(layer_norm(y), layer));
}

Tensor hybrid_encoder_layer(const Tensor& x, const AttentionFn& mha, const LayerTensors& layer) {
  return add(x, feed_forward(mha(layer_norm(x)), layer));
}

Tensor encode(const ModelTensors& tensors, const ModelConfig& config, const Tensor& image,
              const ForwardOptions& options) {
  const auto& g = config.geometry;
  Tensor crop = image;
  if (image.rows() != g.crop_rows || image.cols() != g.crop_cols) {
    std::vector<float> grid(image.values().begin(), image.values().end());
    crop = crop_center(grid, image.rows(), image.cols(), g.crop_rows, g.crop_cols);
  }
  auto patches = patch_and_flatten(crop, g.grid_rows, g.grid_cols);
  auto x = add_row_vector(matmul(patches, tensors.embed_w), tensors.embed_b);
  if (config.variant == Variant::ClassToken) {
    const Tensor rows[] = {tensors.class_token, x};
    x = concat_rows(rows);
  }
  if (config.positional) x = add(x, positional_embedding(x.rows(), config.d_t));

  const attention::HybridOptions hybrid{config.angle_scale, options.gradient};
  for (const auto& layer : tensors.layers) {
    if (config.encoder == EncoderKind::Classical) {
      x = classical_encoder_layer(
          x, [&](const Tensor& in) { return attention::multi_head(in, layer.classical_heads); }, layer);
    } else {
      x = hybrid_encoder_layer(
          x, [&](const Tensor& in) { return attention::multi_head(in, layer.hybrid_heads, hybrid); }, layer);
    }
  }
  return x;
}

Tensor pool(const Tensor& encoded, Variant variant) {
  switch (variant) {
    case Variant::ClassToken:
      return select_row(encoded, 0);
    case Variant::ColumnMax:
      return column_max(encoded);
    case Variant::ColumnMean:
      return column_mean(encoded);
  }
  throw ConfigError("unknown variant");
}

Tensor forward(const ModelTensors& tensors, const ModelConfig& config, const Tensor& image,
               const ForwardOptions& options) {
  auto pooled = pool(encode(tensors, config, image, options), config.variant);
  auto hidden = leaky_relu(add_row_vector(matmul(pooled, tensors.clf_w1), tensors.clf_b1));
  return sigmoid(add_row_vector(matmul(hidden, tensors.clf_w2), tensors.clf_b2));
}

double predict(const ModelConfig& config, const ParameterSet& params, const Tensor& image) {
  return forward(ModelTensors::bind(config, params, false), config, image).item();
}

}  // namespace qvit::model
