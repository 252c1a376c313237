// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "gen.hpp"
#include "oracles.hpp"
#include "qvit/errors.hpp"
#include "qvit/metrics.hpp"

using namespace qvit;
using namespace qvit::train;
using qvit::testing::Gen;

TEST_CASE("perfectly separated scores") {
  const std::vector<double> p = {0.1, 0.2, 0.8, 0.9};
  const std::vector<int> y = {0, 0, 1, 1};
  CHECK(auc(p, y) == 1.0);
  CHECK(accuracy(p, y) == 1.0);
  const std::vector<int> flipped = {1, 1, 0, 0};
  CHECK(auc(p, flipped) == 0.0);
  CHECK(accuracy(p, flipped) == 0.0);
}

TEST_CASE("constant one-half predictor on balanced labels") {
  std::vector<double> p(1000, 0.5);
  std::vector<int> y(1000);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 2);
  const auto m = compute_metrics(p, y, "test");
  CHECK(m.accuracy == 0.5);
  CHECK(std::abs(m.bce - std::log(2.0)) <= 1e-12);
  CHECK(m.auc == 0.5);
  CHECK(m.count == 1000);
  CHECK(m.split == "test");
}

TEST_CASE("rank statistic equals the pairwise count exactly") {
  Gen g(41);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + g.index(300);
    std::vector<double> s(n);
    std::vector<int> y(n);
    // Coarse scores to force plenty of ties.
    const double levels = 1.0 + static_cast<double>(g.index(20));
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::floor(g.unit() * levels) / levels;
      y[i] = g.coin() ? 1 : 0;
    }
    y[0] = 0;
    y[1] = 1;
    CHECK(auc(s, y) == oracle::pairwise_auc(s, y));
  }
}

TEST_CASE("metric ranges on random inputs") {
  Gen g(42);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + g.index(50);
    std::vector<double> p(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = g.unit();
      y[i] = static_cast<int>(i % 2);
    }
    const auto m = compute_metrics(p, y, "val");
    CHECK(m.accuracy >= 0.0);
    CHECK(m.accuracy <= 1.0);
    CHECK(m.auc >= 0.0);
    CHECK(m.auc <= 1.0);
    CHECK(m.bce >= 0.0);
  }
}

TEST_CASE("degenerate inputs") {
  const std::vector<double> none;
  const std::vector<int> no_labels;
  CHECK_THROWS_AS(compute_metrics(none, no_labels, "test"), ValidationError);
  const std::vector<double> p = {0.3, 0.6};
  const std::vector<int> one_class = {1, 1};
  CHECK(std::isnan(auc(p, one_class)));
  const std::vector<int> bad = {0, 2};
  CHECK_THROWS_AS(accuracy(p, bad), ValidationError);
  const std::vector<int> short_labels = {0};
  CHECK_THROWS_AS(mean_bce(p, short_labels), DimensionError);
}

TEST_CASE("bce clamps extreme probabilities") {
  const std::vector<double> p = {0.0, 1.0};
  const std::vector<int> y = {1, 0};
  CHECK(mean_bce(p, y) == doctest::Approx(-std::log(1e-7)));
}
