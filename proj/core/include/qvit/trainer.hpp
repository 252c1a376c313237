// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file
 * Mini-batch Adam training on binary cross-entropy, per-epoch curves,
 * best-epoch selection by validation accuracy, and evaluation.
 *
 * Curve CSV: header `epoch,split,loss,accuracy`, then one row per
 * (epoch, split) with split "train" or "val"; numbers printed with 17
 * significant digits so that reading the file back is lossless.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qvit/checkpoint.hpp"
#include "qvit/data.hpp"
#include "qvit/metrics.hpp"
#include "qvit/model.hpp"

namespace qvit::train {

struct EpochRecord {
  int epoch = 0;
  std::string split;  // "train" or "val"
  double loss = 0.0;
  double accuracy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainConfig {
  int epochs = 40;
  std::size_t batch_size = 512;
  double learning_rate = 5e-3;
  std::uint64_t seed = 0;
  /// Sums per-sample gradients in sample order, independent of thread count.
  bool deterministic = false;
  /// 0: thread_budget().
  std::size_t threads = 0;
  attention::GradientMethod gradient = attention::GradientMethod::Adjoint;
  /// Where to write the last finite parameters if the loss turns NaN.
  std::filesystem::path diagnostic_path;
  std::function<void(const EpochRecord& train, const EpochRecord& val)> on_epoch;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);

struct TrainResult {
  model::Checkpoint best;
  std::vector<EpochRecord> curves;
  std::size_t steps = 0;
};

/// Initializes parameters from config.seed and trains. epochs == 0 returns
/// the initialization with empty curves. Throws NumericError when a batch
/// loss or gradient becomes non-finite.
TrainResult train(const model::ModelConfig& config, std::span<const data::EventRecord> train_set,
                  std::span<const data::EventRecord> val_set, const TrainConfig& train_config);

/// Electron probabilities for each record.
std::vector<double> predict_all(const model::ModelConfig& config, const model::ParameterSet& params,
                                std::span<const data::EventRecord> records, std::size_t threads = 0);

MetricsReport evaluate(const model::Checkpoint& checkpoint, std::span<const data::EventRecord> records,
                       std::string split, std::size_t threads = 0);

void export_curves(std::span<const EpochRecord> curves, const std::filesystem::path& path);
std::vector<EpochRecord> read_curves(const std::filesystem::path& path);

}  // namespace qvit::train
