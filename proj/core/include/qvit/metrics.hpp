// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace qvit::train {

/// Fraction of samples where (p >= threshold) matches the label.
double accuracy(std::span<const double> probs, std::span<const int> labels, double threshold = 0.5);

/// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
double mean_bce(std::span<const double> probs, std::span<const int> labels);

/// Area under the ROC curve from the Mann-Whitney rank statistic; tied
/// scores earn half credit. NaN when only one class is present.
double auc(std::span<const double> scores, std::span<const int> labels);

struct MetricsReport {
  std::string split;
  std::size_t count = 0;
  double accuracy = 0.0;
  double bce = 0.0;
  double auc = 0.0;
};

MetricsReport compute_metrics(std::span<const double> probs, std::span<const int> labels, std::string split);

}  // namespace qvit::train
