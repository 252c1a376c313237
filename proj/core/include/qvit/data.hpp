// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

/**
 * @file
 * Calorimeter shower events: file formats, per-event normalization, a
 * statistical shower generator and stratified splits.
 *
 * Portable format (little-endian):
 *
 *   offset 0   8 bytes  magic "QVITDATA"
 *   offset 8   u32      version (1)
 *   offset 12  u64      record count N
 *   offset 20  N records of 2049 f32 each:
 *                1024 energy values (32x32 row-major, row = eta, col = phi)
 *                1024 timing values (same layout)
 *                1 label (0 = photon, 1 = electron)
 *
 * HDF5 format: dataset /X float32 (N, 32, 32, 2) with channel 0 energy and
 * channel 1 timing, dataset /y float32 (N,) labels.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qvit::data {

inline constexpr std::size_t kGridSide = 32;
inline constexpr std::size_t kGridCells = kGridSide * kGridSide;

struct EventRecord {
  std::vector<float> energy = std::vector<float>(kGridCells, 0.0F);
  std::vector<float> time = std::vector<float>(kGridCells, 0.0F);
  int label = 0;  // 0 photon, 1 electron
};

enum class Format { Portable, Hdf5 };
Format parse_format(std::string_view text);
bool hdf5_available();

/// Divides the energy grid by its maximum; timing is untouched. Throws
/// ValidationError for a grid without a positive entry.
EventRecord normalize(EventRecord record);

struct ReaderOptions {
  bool normalize = true;
};

/// Streams records from a file. Records with an all-zero energy grid are
/// skipped and counted when normalizing.
class DatasetReader {
 public:
  DatasetReader(const std::filesystem::path& path, Format format, ReaderOptions options = {});
  ~DatasetReader();
  DatasetReader(DatasetReader&&) noexcept;
  DatasetReader& operator=(DatasetReader&&) noexcept;

  std::optional<EventRecord> next();
  std::uint64_t declared_size() const;
  std::uint64_t rejected() const noexcept { return rejected_; }

  class Source;

 private:
  std::unique_ptr<Source> source_;
  ReaderOptions options_;
  std::uint64_t rejected_ = 0;
};

std::vector<EventRecord> load_dataset(const std::filesystem::path& path, Format format, ReaderOptions options = {});

void write_dataset(const std::filesystem::path& path, std::span<const EventRecord> records, Format format);

/// Shape parameters of the synthetic showers. Photons deposit an isotropic
/// Gaussian; electrons are wider in phi (phi_stretch) and lopsided towards
/// +phi (phi_skew).
struct SynthParams {
  double sigma_min = 0.7;   // eta width range, in crystals
  double sigma_max = 1.5;
  double phi_stretch = 1.5;
  double phi_skew = 0.4;
  double halo_fraction = 0.08;
  double halo_scale = 3.0;
  double noise = 0.03;      // Poisson-like: sd = noise * sqrt(value)
  double pedestal = 0.003;  // flat electronic noise sd
  double center_jitter = 0.25;

  /// Both classes identically distributed.
  static SynthParams indistinguishable();
};

/// n normalized events, labels alternating photon/electron.
std::vector<EventRecord> synth_generate(std::size_t n, std::uint64_t seed, const SynthParams& params = {});

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
  SplitFractions fractions;
};

/// Seeded shuffle stratified by label. Fractions must be non-negative and sum
/// to 1.
DatasetSplit split(std::span<const int> labels, SplitFractions fractions, std::uint64_t seed);
DatasetSplit split(std::span<const EventRecord> records, SplitFractions fractions, std::uint64_t seed);

std::vector<EventRecord> subset(std::span<const EventRecord> records, std::span<const std::size_t> indices);

/// Hex SHA-1 of "blob <size>\0" followed by the file bytes, as `git hash-object`.
std::string content_hash(const std::filesystem::path& path);

}  // namespace qvit::data
