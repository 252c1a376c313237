// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "qvit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "qvit/errors.hpp"
#include "qvit/tensor.hpp"

namespace qvit::train {

namespace {

void check(std::span<const double> probs, std::span<const int> labels) {
  if (probs.empty()) throw ValidationError("metrics need at least one sample");
  if (probs.size() != labels.size()) throw DimensionError("metrics: predictions and labels differ in length");
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("metrics: labels must be 0 or 1");
  }
}

}  // namespace

double accuracy(std::span<const double> probs, std::span<const int> labels, double threshold) {
  check(probs, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) hits += ((probs[i] >= threshold) == (labels[i] == 1)) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

double mean_bce(std::span<const double> probs, std::span<const int> labels) {
  check(probs, labels);
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  check(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the mid-rank (1-based) of each tie group, kept integral.
  std::uint64_t positives = 0, rank_sum_x2 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i + 1;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t rank_x2 = i + j + 1;  // (i+1) + j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        ++positives;
        rank_sum_x2 += rank_x2;
      }
    }
    i = j;
  }
  const std::uint64_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::numeric_limits<double>::quiet_NaN();
  // 2U = 2 * rank_sum - n1 (n1 + 1); AUC = U / (n1 n0).
  const std::uint64_t u_x2 = rank_sum_x2 - positives * (positives + 1);
  return static_cast<double>(u_x2) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

MetricsReport compute_metrics(std::span<const double> probs, std::span<const int> labels, std::string split) {
  MetricsReport r;
  r.split = std::move(split);
  r.count = probs.size();
  r.accuracy = accuracy(probs, labels);
  r.bce = mean_bce(probs, labels);
  r.auc = auc(probs, labels);
  return r;
}

}  // namespace qvit::train
