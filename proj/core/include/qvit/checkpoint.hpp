// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file
 * Checkpoint file layout (all integers little-endian):
 *
 *   offset 0   8 bytes   magic "QVITCKPT"
 *   offset 8   u32       format version (1)
 *   offset 12  u64       header length H in bytes
 *   offset 20  H bytes   UTF-8 JSON header
 *   20+H       u64       parameter count P
 *   28+H       P x f32   parameters in parameter_layout() order
 *
 * The JSON header carries "config", "seed", "epoch", "metrics", "layout"
 * (name and shape of every tensor) and a free-form "extra" object.
 */

#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "qvit/model.hpp"

namespace qvit::model {

struct Checkpoint {
  ModelConfig config;
  std::uint64_t seed = 0;
  int epoch = 0;
  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();
  ParameterSet params;
};

inline constexpr char kCheckpointMagic[8] = {'Q', 'V', 'I', 'T', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace qvit::model
