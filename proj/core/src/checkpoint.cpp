// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "qvit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "qvit/errors.hpp"

namespace qvit::model {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& is, std::uint64_t& offset, const char* what) {
  T value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw ParseError(std::string("truncated ") + what, offset);
  offset += sizeof(T);
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json layout = nlohmann::json::array();
  for (const auto& e : ckpt.params.entries()) layout.push_back({{"name", e.spec.name}, {"shape", e.spec.shape}});
  const nlohmann::json header = {
      {"config", to_json(ckpt.config)}, {"seed", ckpt.seed},     {"epoch", ckpt.epoch},
      {"metrics", ckpt.metrics},        {"layout", layout},      {"extra", ckpt.extra},
      {"param_count", ckpt.params.size()},
  };
  const auto text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(os, kCheckpointVersion);
  put<std::uint64_t>(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint64_t>(os, ckpt.params.size());
  for (double v : ckpt.params.values()) put<float>(os, static_cast<float>(v));
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  std::uint64_t offset = 0;
  char magic[8];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ParseError("not a qvit checkpoint", 0);
  }
  offset += sizeof(magic);
  const auto version = get<std::uint32_t>(is, offset, "version");
  if (version != kCheckpointVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version), 8);
  const auto header_len = get<std::uint64_t>(is, offset, "header length");
  if (header_len > std::filesystem::file_size(path) - offset) throw ParseError("header length exceeds file size", 12);
  std::string text(header_len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(header_len))) throw ParseError("truncated header", offset);

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint header: ") + e.what(), offset);
  }
  offset += header_len;

  Checkpoint ckpt;
  if (!header.is_object() || !header.contains("config")) throw SchemaError("checkpoint header has no config");
  try {
    ckpt.config = config_from_json(header.at("config"));
  } catch (const ValidationError& e) {
    throw SchemaError(std::string("checkpoint config: ") + e.what());
  }
  try {
    ckpt.seed = header.value("seed", std::uint64_t{0});
    ckpt.epoch = header.value("epoch", 0);
    ckpt.metrics = header.value("metrics", nlohmann::json::object());
    ckpt.extra = header.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint header: ") + e.what());
  }
  ckpt.params = ParameterSet::zeros(ckpt.config);

  const auto count = get<std::uint64_t>(is, offset, "parameter count");
  if (count != ckpt.params.size()) {
    throw SchemaError("checkpoint holds " + std::to_string(count) + " parameters but its config needs " +
                      std::to_string(ckpt.params.size()));
  }
  auto values = ckpt.params.values();
  for (std::size_t i = 0; i < count; ++i) values[i] = get<float>(is, offset, "parameter block");
  return ckpt;
}

}  // namespace qvit::model
