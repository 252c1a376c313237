// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "gen.hpp"
#include "oracles.hpp"
#include "qvit/data.hpp"
#include "qvit/errors.hpp"
#include "qvit/model.hpp"

using namespace qvit;
using namespace qvit::model;
using qvit::testing::Gen;

namespace {

ModelConfig make(EncoderKind e, Variant v, bool pos = true) {
  ModelConfig c;
  c.encoder = e;
  c.variant = v;
  c.positional = pos;
  return c;
}

// Small hybrid configuration: 2x2 patches of an 8x8 crop, d_t=8, two heads.
ModelConfig small_config(EncoderKind e, Variant v) {
  ModelConfig c = make(e, v);
  c.geometry = {8, 8, 2, 2};
  c.d_t = 8;
  c.n_h = 2;
  c.d_ff = 8;
  c.n_l = 2;
  return c;
}

std::vector<float> random_grid(Gen& g) {
  std::vector<float> grid(data::kGridCells);
  for (auto& v : grid) v = static_cast<float>(g.unit());
  return grid;
}

Tensor grid_tensor(const std::vector<float>& grid) {
  return Tensor::matrix(32, 32, std::vector<double>(grid.begin(), grid.end()));
}

}  // namespace

TEST_CASE("parameter counts for every encoder and variant") {
  CHECK(count_params(make(EncoderKind::Classical, Variant::ClassToken)) == 4801);
  CHECK(count_params(make(EncoderKind::Hybrid, Variant::ClassToken)) == 4601);
  CHECK(count_params(make(EncoderKind::Classical, Variant::ColumnMax)) == 4785);
  CHECK(count_params(make(EncoderKind::Hybrid, Variant::ColumnMax)) == 4585);
  CHECK(count_params(make(EncoderKind::Classical, Variant::ColumnMean)) == 4785);
  CHECK(count_params(make(EncoderKind::Hybrid, Variant::ColumnMean)) == 4585);
  CHECK(count_params(make(EncoderKind::Hybrid, Variant::ColumnMean, false)) == 4585);
}

TEST_CASE("closed form reconciles with the allocation") {
  for (auto e : {EncoderKind::Classical, EncoderKind::Hybrid}) {
    for (auto v : {Variant::ClassToken, Variant::ColumnMax, Variant::ColumnMean}) {
      auto c = make(e, v);
      const auto audit = audit_param_count(c);
      CHECK(audit.consistent());
      CHECK(audit.classifier_constant == 65);
      CHECK(closed_form_param_count(c) == count_params(c));
      CHECK(classical_minus_hybrid(c) == 200);
    }
  }
}

TEST_CASE("classical minus hybrid difference on random sizes") {
  Gen g(21);
  for (int trial = 0; trial < 40; ++trial) {
    ModelConfig c;
    c.n_h = 1 + g.index(4);
    c.d_t = c.n_h * (2 + g.index(4));
    c.d_ff = 1 + g.index(20);
    c.n_l = 1 + g.index(6);
    c.variant = g.coin() ? Variant::ClassToken : Variant::ColumnMean;
    auto classical = c, hybrid = c;
    classical.encoder = EncoderKind::Classical;
    hybrid.encoder = EncoderKind::Hybrid;
    CHECK(static_cast<std::int64_t>(count_params(classical)) - static_cast<std::int64_t>(count_params(hybrid)) ==
          classical_minus_hybrid(c));
    CHECK(audit_param_count(classical).consistent());
    CHECK(audit_param_count(hybrid).consistent());
  }
}

TEST_CASE("layout order and names") {
  const auto layout = parameter_layout(make(EncoderKind::Hybrid, Variant::ClassToken));
  CHECK(layout.front().name == "embed.weight");
  CHECK(layout[1].name == "embed.bias");
  CHECK(layout[2].name == "class_token");
  CHECK(layout[3].name == "layer0.head0.theta_k");
  CHECK(layout[3].shape == Shape{13});
  CHECK(layout[5].shape == Shape{12});
  CHECK(layout.back().name == "classifier.b2");
  std::set<std::string> names;
  for (const auto& s : layout) names.insert(s.name);
  CHECK(names.size() == layout.size());
}

TEST_CASE("config validation") {
  ModelConfig c;
  c.n_h = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.geometry.grid_cols = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(parse_variant("max"), ConfigError);
  CHECK(parse_variant("column_mean") == Variant::ColumnMean);
  CHECK_THROWS_AS(parse_encoder("quantum"), ConfigError);
  const auto d = ModelConfig{};
  CHECK(d.n_t() == 16);
  CHECK(d.d_i() == 32);
  CHECK(d.d_h() == 4);
}

TEST_CASE("config json round trip") {
  auto c = make(EncoderKind::Hybrid, Variant::ColumnMean, false);
  c.angle_scale = 0.5;
  const auto back = config_from_json(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK_THROWS_AS(config_from_json({{"d_t", "wide"}}), ConfigError);
}

TEST_CASE("initialization ranges and reproducibility") {
  const auto c = make(EncoderKind::Hybrid, Variant::ClassToken);
  const auto a = ParameterSet::initialize(c, 5), b = ParameterSet::initialize(c, 5), other = ParameterSet::initialize(c, 6);
  CHECK(std::vector<double>(a.values().begin(), a.values().end()) ==
        std::vector<double>(b.values().begin(), b.values().end()));
  CHECK(std::vector<double>(a.values().begin(), a.values().end()) !=
        std::vector<double>(other.values().begin(), other.values().end()));
  for (double v : a.find("class_token")) CHECK(v == 0.0);
  for (double v : a.find("layer2.head1.theta_v")) {
    CHECK(v >= -std::numbers::pi);
    CHECK(v < std::numbers::pi);
  }
  for (double v : a.find("embed.weight")) CHECK(std::abs(v) <= 1.0 / std::sqrt(32.0));
  for (double v : a.find("classifier.w2")) CHECK(std::abs(v) <= 1.0 / std::sqrt(32.0));
  CHECK_THROWS_AS(a.find("nope"), ValidationError);
}

TEST_CASE("patch layout on a 4x4 image") {
  std::vector<double> img(16);
  for (std::size_t i = 0; i < 16; ++i) img[i] = static_cast<double>(i);
  const auto p = patch_and_flatten(Tensor::matrix(4, 4, img), 2, 2);
  const std::vector<double> expected = {0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15};
  CHECK(std::vector<double>(p.values().begin(), p.values().end()) == expected);
  CHECK_THROWS_AS(patch_and_flatten(Tensor::matrix(4, 4, img), 3, 2), ConfigError);
}

TEST_CASE("constant image gives identical patch rows") {
  const auto p = patch_and_flatten(Tensor::matrix(16, 32, std::vector<double>(512, 0.25)), 4, 4);
  CHECK(p.rows() == 16);
  CHECK(p.cols() == 32);
  for (std::size_t i = 0; i < p.numel(); ++i) CHECK(p[i] == 0.25);
}

TEST_CASE("central crop") {
  std::vector<float> grid(32 * 32);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = static_cast<float>(i);
  const auto c = crop_center(grid, 32, 32, 16, 32);
  CHECK(c.rows() == 16);
  CHECK(c(0, 0) == 8 * 32);
  CHECK(c(15, 31) == 23 * 32 + 31);
  CHECK_THROWS_AS(crop_center(grid, 32, 32, 40, 8), ConfigError);
}

TEST_CASE("positional table") {
  const auto t = positional_embedding(17, 16);
  CHECK(t.rows() == 17);
  for (std::size_t c = 0; c < 16; ++c) CHECK(t(0, c) == (c % 2 == 0 ? 0.0 : 1.0));
  CHECK(t(3, 0) == doctest::Approx(std::sin(3.0)));
  CHECK(t(3, 1) == doctest::Approx(std::cos(3.0)));
  CHECK(t(5, 4) == doctest::Approx(std::sin(5.0 / std::pow(10000.0, 4.0 / 16.0))));
  for (std::size_t i = 0; i < t.numel(); ++i) CHECK(std::abs(t[i]) <= 1.0);
}

TEST_CASE("forward pass matches the straight-line oracle") {
  Gen g(22);
  for (auto e : {EncoderKind::Classical, EncoderKind::Hybrid}) {
    for (auto v : {Variant::ClassToken, Variant::ColumnMax, Variant::ColumnMean}) {
      for (bool pos : {true, false}) {
        auto c = make(e, v, pos);
        const auto params = ParameterSet::initialize(c, g.next());
        const auto grid = random_grid(g);
        const double got = predict(c, params, grid_tensor(grid));
        const double ref = oracle::model_probability(c, params, grid);
        CHECK(std::abs(got - ref) <= 1e-10);
        CHECK(got > 0.0);
        CHECK(got < 1.0);
      }
    }
  }
}

TEST_CASE("class-token hybrid prediction ignores the image") {
  Gen g(23);
  const auto c = make(EncoderKind::Hybrid, Variant::ClassToken);
  const auto params = ParameterSet::initialize(c, 9);
  const double first = predict(c, params, grid_tensor(random_grid(g)));
  for (int trial = 0; trial < 5; ++trial) CHECK(std::abs(predict(c, params, grid_tensor(random_grid(g))) - first) <= 1e-12);
}

TEST_CASE("column-pooled hybrid prediction depends on the image") {
  Gen g(24);
  const auto c = make(EncoderKind::Hybrid, Variant::ColumnMax);
  const auto params = ParameterSet::initialize(c, 9);
  const double a = predict(c, params, grid_tensor(random_grid(g)));
  const double b = predict(c, params, grid_tensor(random_grid(g)));
  CHECK(a != b);
}

TEST_CASE("model gradients match finite differences") {
  Gen g(25);
  for (auto e : {EncoderKind::Classical, EncoderKind::Hybrid}) {
    for (auto v : {Variant::ClassToken, Variant::ColumnMax, Variant::ColumnMean}) {
      const auto c = small_config(e, v);
      auto params = ParameterSet::initialize(c, g.next());
      // Non-zero class token so its gradient path is exercised away from the origin.
      if (v == Variant::ClassToken)
        for (double& x : params.find("class_token")) x = g.uniform(-0.5, 0.5);
      const auto image = grid_tensor(random_grid(g));
      const double label = 1.0;

      const auto tensors = ModelTensors::bind(c, params, true);
      backward(bce_loss(forward(tensors, c, image), Tensor::vector({label})));
      std::vector<double> grad(params.size(), 0.0);
      tensors.accumulate_grads(grad);

      auto loss_at = [&](std::span<const double> flat) {
        auto p = params;
        std::copy(flat.begin(), flat.end(), p.values().begin());
        return bce_loss(forward(ModelTensors::bind(c, p, false), c, image), Tensor::vector({label})).item();
      };
      const std::vector<double> base(params.values().begin(), params.values().end());
      for (std::size_t i = 0; i < base.size(); ++i) {
        const double fd = oracle::central_difference(loss_at, base, i, 1e-6);
        CHECK(std::abs(grad[i] - fd) <= 1e-5 * std::max(1e-2, std::abs(fd)) + 1e-9);
      }
    }
  }
}

TEST_CASE("binding rejects a parameter set from another config") {
  const auto a = ParameterSet::initialize(make(EncoderKind::Classical, Variant::ColumnMax), 1);
  CHECK_THROWS_AS(ModelTensors::bind(make(EncoderKind::Hybrid, Variant::ColumnMax), a, false), ConfigError);
}
