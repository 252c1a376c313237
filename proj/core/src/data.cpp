// Copyright 2026 The qvit Authors
// SPDX-License-Identifier: Apache-2.0

#include "qvit/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include <openssl/evp.h>

#ifdef QVIT_HAVE_HDF5
#include <hdf5.h>
#endif

#include "qvit/errors.hpp"

namespace qvit::data {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'Q', 'V', 'I', 'T', 'D', 'A', 'T', 'A'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kHeaderBytes = 8 + 4 + 8;
constexpr std::uint64_t kRecordFloats = 2 * kGridCells + 1;
constexpr std::uint64_t kRecordBytes = kRecordFloats * sizeof(float);

int checked_label(double raw) {
  if (raw == 0.0) return 0;
  if (raw == 1.0) return 1;
  throw SchemaError("label " + std::to_string(raw) + " is neither 0 nor 1");
}

bool all_finite(std::span<const float> values) {
  return std::all_of(values.begin(), values.end(), [](float v) { return std::isfinite(v); });
}

}  // namespace

Format parse_format(std::string_view text) {
  if (text == "portable") return Format::Portable;
  if (text == "hdf5") return Format::Hdf5;
  throw ConfigError("unknown data format '" + std::string(text) + "'");
}

bool hdf5_available() {
#ifdef QVIT_HAVE_HDF5
  return true;
#else
  return false;
#endif
}

EventRecord normalize(EventRecord record) {
  if (record.energy.size() != kGridCells) throw DimensionError("energy grid must hold 32x32 values");
  const float peak = *std::max_element(record.energy.begin(), record.energy.end());
  if (!(peak > 0.0F)) throw ValidationError("energy grid has no positive entry");
  for (auto& v : record.energy) v /= peak;
  return record;
}

class DatasetReader::Source {
 public:
  virtual ~Source() = default;
  virtual std::optional<EventRecord> read() = 0;
  virtual std::uint64_t size() const = 0;
};

namespace {

class PortableSource final : public DatasetReader::Source {
 public:
  explicit PortableSource(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open dataset: " + path.string());
    const auto bytes = std::filesystem::file_size(path);
    if (bytes == 0) throw SchemaError("dataset file is empty: " + path.string());
    char magic[8];
    if (!in_.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
      throw ParseError("missing QVITDATA magic in " + path.string(), 0);
    }
    std::uint32_t version = 0;
    if (!in_.read(reinterpret_cast<char*>(&version), sizeof(version))) throw ParseError("truncated header", 8);
    if (version != kVersion) throw SchemaError("unsupported dataset version " + std::to_string(version));
    if (!in_.read(reinterpret_cast<char*>(&count_), sizeof(count_))) throw ParseError("truncated header", 12);
    if (count_ == 0) throw SchemaError("dataset declares zero records: " + path.string());
    offset_ = kHeaderBytes;
  }

  std::optional<EventRecord> read() override {
    if (index_ == count_) return std::nullopt;
    if (!in_.read(reinterpret_cast<char*>(buffer_.data()), kRecordBytes)) {
      throw ParseError("truncated record " + std::to_string(index_), offset_);
    }
    EventRecord r;
    std::copy_n(buffer_.begin(), kGridCells, r.energy.begin());
    std::copy_n(buffer_.begin() + kGridCells, kGridCells, r.time.begin());
    if (!all_finite(buffer_)) throw ParseError("non-finite value in record " + std::to_string(index_), offset_);
    r.label = checked_label(buffer_.back());
    ++index_;
    offset_ += kRecordBytes;
    return r;
  }

  std::uint64_t size() const override { return count_; }

 private:
  std::ifstream in_;
  std::uint64_t count_ = 0;
  std::uint64_t index_ = 0;
  std::uint64_t offset_ = 0;
  std::vector<float> buffer_ = std::vector<float>(kRecordFloats);
};

#ifdef QVIT_HAVE_HDF5

class Hdf5Source final : public DatasetReader::Source {
 public:
  explicit Hdf5Source(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("cannot open dataset: " + path.string());
    H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
    file_ = H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT);
    if (file_ < 0) throw ParseError("not a readable HDF5 file: " + path.string(), 0);
    x_ = H5Dopen2(file_, "/X", H5P_DEFAULT);
    y_ = H5Dopen2(file_, "/y", H5P_DEFAULT);
    if (x_ < 0 || y_ < 0) {
      close();
      throw SchemaError("HDF5 dataset needs /X and /y: " + path.string());
    }
    hsize_t dims[4] = {0, 0, 0, 0};
    const hid_t space = H5Dget_space(x_);
    const int rank = H5Sget_simple_extent_ndims(space);
    if (rank == 3 || rank == 4) H5Sget_simple_extent_dims(space, dims, nullptr);
    H5Sclose(space);
    channels_ = rank == 4 ? dims[3] : 1;
    if ((rank != 3 && rank != 4) || dims[1] != kGridSide || dims[2] != kGridSide || channels_ == 0 ||
        channels_ > 2) {
      close();
      throw SchemaError("/X must have shape (N, 32, 32, 2) or (N, 32, 32)");
    }
    count_ = dims[0];
    const hid_t yspace = H5Dget_space(y_);
    hsize_t ydims[2] = {0, 0};
    const int yrank = H5Sget_simple_extent_ndims(yspace);
    if (yrank >= 1 && yrank <= 2) H5Sget_simple_extent_dims(yspace, ydims, nullptr);
    H5Sclose(yspace);
    if (yrank < 1 || yrank > 2 || ydims[0] != count_ || (yrank == 2 && ydims[1] != 1)) {
      close();
      throw SchemaError("/y must have shape (N,) matching /X");
    }
    if (count_ == 0) {
      close();
      throw SchemaError("HDF5 dataset holds zero events");
    }
  }

  ~Hdf5Source() override { close(); }

  std::optional<EventRecord> read() override {
    if (index_ == count_) return std::nullopt;
    if (index_ == chunk_begin_ + chunk_size_) load_chunk(index_);
    const auto k = index_ - chunk_begin_;
    EventRecord r;
    const float* px = xbuf_.data() + k * kGridCells * channels_;
    for (std::size_t c = 0; c < kGridCells; ++c) {
      r.energy[c] = px[c * channels_];
      if (channels_ == 2) r.time[c] = px[c * channels_ + 1];
    }
    if (!all_finite(r.energy) || !all_finite(r.time) || !std::isfinite(ybuf_[k])) {
      throw ParseError("non-finite value in event " + std::to_string(index_), index_);
    }
    r.label = checked_label(ybuf_[k]);
    ++index_;
    return r;
  }

  std::uint64_t size() const override { return count_; }

 private:
  void load_chunk(std::uint64_t begin) {
    const hsize_t n = std::min<hsize_t>(kChunk, count_ - begin);
    xbuf_.resize(n * kGridCells * channels_);
    ybuf_.resize(n);
    {
      const hid_t space = H5Dget_space(x_);
      hsize_t start[4] = {begin, 0, 0, 0};
      hsize_t count[4] = {n, kGridSide, kGridSide, channels_};
      const int rank = channels_ == 1 && H5Sget_simple_extent_ndims(space) == 3 ? 3 : 4;
      H5Sselect_hyperslab(space, H5S_SELECT_SET, start, nullptr, count, nullptr);
      const hid_t mem = H5Screate_simple(rank, count, nullptr);
      const herr_t st = H5Dread(x_, H5T_NATIVE_FLOAT, mem, space, H5P_DEFAULT, xbuf_.data());
      H5Sclose(mem);
      H5Sclose(space);
      if (st < 0) throw ParseError("failed reading /X", begin);
    }
    {
      const hid_t space = H5Dget_space(y_);
      const int rank = H5Sget_simple_extent_ndims(space);
      hsize_t start[2] = {begin, 0};
      hsize_t count[2] = {n, 1};
      H5Sselect_hyperslab(space, H5S_SELECT_SET, start, nullptr, count, nullptr);
      const hid_t mem = H5Screate_simple(rank, count, nullptr);
      const herr_t st = H5Dread(y_, H5T_NATIVE_FLOAT, mem, space, H5P_DEFAULT, ybuf_.data());
      H5Sclose(mem);
      H5Sclose(space);
      if (st < 0) throw ParseError("failed reading /y", begin);
    }
    chunk_begin_ = begin;
    chunk_size_ = n;
  }

  void close() {
    if (x_ >= 0) H5Dclose(x_);
    if (y_ >= 0) H5Dclose(y_);
    if (file_ >= 0) H5Fclose(file_);
    x_ = y_ = file_ = -1;
  }

  static constexpr hsize_t kChunk = 512;
  hid_t file_ = -1, x_ = -1, y_ = -1;
  hsize_t channels_ = 2;
  std::uint64_t count_ = 0, index_ = 0, chunk_begin_ = 0, chunk_size_ = 0;
  std::vector<float> xbuf_, ybuf_;
};

void write_hdf5(const std::filesystem::path& path, std::span<const EventRecord> records) {
  H5Eset_auto2(H5E_DEFAULT, nullptr, nullptr);
  const hid_t file = H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT);
  if (file < 0) throw IoError("cannot create HDF5 file: " + path.string());
  const hsize_t n = records.size();
  std::vector<float> x(n * kGridCells * 2), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < kGridCells; ++c) {
      x[(i * kGridCells + c) * 2] = records[i].energy[c];
      x[(i * kGridCells + c) * 2 + 1] = records[i].time[c];
    }
    y[i] = static_cast<float>(records[i].label);
  }
  const hsize_t xdims[4] = {n, kGridSide, kGridSide, 2};
  const hsize_t ydims[1] = {n};
  const hid_t xs = H5Screate_simple(4, xdims, nullptr);
  const hid_t ys = H5Screate_simple(1, ydims, nullptr);
  const hid_t xd = H5Dcreate2(file, "/X", H5T_IEEE_F32LE, xs, H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT);
  const hid_t yd = H5Dcreate2(file, "/y", H5T_IEEE_F32LE, ys, H5P_DEFAULT, H5P_DEFAULT, H5P_DEFAULT);
  herr_t st = -1;
  if (xd >= 0 && yd >= 0) {
    st = H5Dwrite(xd, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, x.data());
    if (st >= 0) st = H5Dwrite(yd, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, y.data());
  }
  if (xd >= 0) H5Dclose(xd);
  if (yd >= 0) H5Dclose(yd);
  H5Sclose(xs);
  H5Sclose(ys);
  H5Fclose(file);
  if (st < 0) throw IoError("failed writing HDF5 file: " + path.string());
}

#endif

void write_portable(const std::filesystem::path& path, std::span<const EventRecord> records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open dataset for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  os.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  const std::uint64_t n = records.size();
  os.write(reinterpret_cast<const char*>(&n), sizeof(n));
  for (const auto& r : records) {
    if (r.energy.size() != kGridCells || r.time.size() != kGridCells) {
      throw DimensionError("event grids must hold 32x32 values");
    }
    os.write(reinterpret_cast<const char*>(r.energy.data()), kGridCells * sizeof(float));
    os.write(reinterpret_cast<const char*>(r.time.data()), kGridCells * sizeof(float));
    const auto label = static_cast<float>(r.label);
    os.write(reinterpret_cast<const char*>(&label), sizeof(label));
  }
  if (!os) throw IoError("failed writing dataset: " + path.string());
}

}  // namespace

DatasetReader::DatasetReader(const std::filesystem::path& path, Format format, ReaderOptions options)
    : options_(options) {
  if (format == Format::Portable) {
    source_ = std::make_unique<PortableSource>(path);
  } else {
#ifdef QVIT_HAVE_HDF5
    source_ = std::make_unique<Hdf5Source>(path);
#else
    throw ConfigError("this build has no HDF5 support");
#endif
  }
}

DatasetReader::~DatasetReader() = default;
DatasetReader::DatasetReader(DatasetReader&&) noexcept = default;
DatasetReader& DatasetReader::operator=(DatasetReader&&) noexcept = default;

std::optional<EventRecord> DatasetReader::next() {
  while (auto r = source_->read()) {
    if (!options_.normalize) return r;
    if (!(*std::max_element(r->energy.begin(), r->energy.end()) > 0.0F)) {
      ++rejected_;
      continue;
    }
    return normalize(std::move(*r));
  }
  return std::nullopt;
}

std::uint64_t DatasetReader::declared_size() const { return source_->size(); }

std::vector<EventRecord> load_dataset(const std::filesystem::path& path, Format format, ReaderOptions options) {
  DatasetReader reader(path, format, options);
  std::vector<EventRecord> out;
  out.reserve(reader.declared_size());
  while (auto r = reader.next()) out.push_back(std::move(*r));
  return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const EventRecord> records, Format format) {
  if (format == Format::Portable) {
    write_portable(path, records);
    return;
  }
#ifdef QVIT_HAVE_HDF5
  write_hdf5(path, records);
#else
  throw ConfigError("this build has no HDF5 support");
#endif
}

SynthParams SynthParams::indistinguishable() {
  SynthParams p;
  p.phi_stretch = 1.0;
  p.phi_skew = 0.0;
  return p;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Probability mass of a split normal (left width sl, right width sr) in [a, b).
double split_normal_mass(double a, double b, double mu, double sl, double sr) {
  auto cdf = [&](double x) {
    const double total = sl + sr;
    if (x < mu) return 2.0 * sl / total * normal_cdf((x - mu) / sl);
    return (sl - sr) / total + 2.0 * sr / total * normal_cdf((x - mu) / sr);
  };
  return cdf(b) - cdf(a);
}

}  // namespace

std::vector<EventRecord> synth_generate(std::size_t n, std::uint64_t seed, const SynthParams& p) {
  if (n == 0) throw ValidationError("synth_generate: n must be at least 1");
  if (!(p.sigma_min > 0.0) || p.sigma_max < p.sigma_min || p.phi_stretch <= 0.0 || p.phi_skew < 0.0) {
    throw ConfigError("synth_generate: invalid shower parameters");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> width(p.sigma_min, p.sigma_max);
  std::uniform_real_distribution<double> jitter(-p.center_jitter, p.center_jitter);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double center = static_cast<double>(kGridSide / 2) + 0.5;
  std::vector<EventRecord> out(n);
  std::vector<double> eta_core(kGridSide), eta_halo(kGridSide), phi_core(kGridSide), phi_halo(kGridSide);
  for (std::size_t k = 0; k < n; ++k) {
    auto& r = out[k];
    r.label = static_cast<int>(k % 2);
    const bool electron = r.label == 1;
    const double s_eta = width(rng);
    const double s_phi = electron ? s_eta * p.phi_stretch : s_eta;
    const double s_phi_right = electron ? s_phi * (1.0 + p.phi_skew) : s_phi;
    const double mu_eta = center + jitter(rng);
    const double mu_phi = center + jitter(rng);
    for (std::size_t i = 0; i < kGridSide; ++i) {
      const double lo = static_cast<double>(i), hi = lo + 1.0;
      eta_core[i] = split_normal_mass(lo, hi, mu_eta, s_eta, s_eta);
      eta_halo[i] = split_normal_mass(lo, hi, mu_eta, s_eta * p.halo_scale, s_eta * p.halo_scale);
      phi_core[i] = split_normal_mass(lo, hi, mu_phi, s_phi, s_phi_right);
      phi_halo[i] = split_normal_mass(lo, hi, mu_phi, s_phi * p.halo_scale, s_phi_right * p.halo_scale);
    }
    double peak = 0.0;
    std::vector<double> clean(kGridCells);
    for (std::size_t i = 0; i < kGridSide; ++i)
      for (std::size_t j = 0; j < kGridSide; ++j) {
        const double v = (1.0 - p.halo_fraction) * eta_core[i] * phi_core[j] +
                         p.halo_fraction * eta_halo[i] * phi_halo[j];
        clean[i * kGridSide + j] = v;
        peak = std::max(peak, v);
      }
    for (std::size_t c = 0; c < kGridCells; ++c) {
      const double v = clean[c] / peak;
      const double noisy = v + p.noise * std::sqrt(v) * gauss(rng) + p.pedestal * gauss(rng);
      r.energy[c] = static_cast<float>(std::max(0.0, noisy));
      r.time[c] = v > 0.01 ? static_cast<float>(gauss(rng)) : 0.0F;
    }
    r = normalize(std::move(r));
  }
  return out;
}

DatasetSplit split(std::span<const int> labels, SplitFractions f, std::uint64_t seed) {
  if (f.train < 0.0 || f.validation < 0.0 || f.test < 0.0 ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  DatasetSplit s;
  s.seed = seed;
  s.fractions = f;
  std::mt19937_64 rng(seed);
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto n = static_cast<double>(members.size());
    const auto n_train = std::min(members.size(), static_cast<std::size_t>(std::floor(f.train * n + 0.5)));
    const auto n_val =
        std::min(members.size() - n_train, static_cast<std::size_t>(std::floor(f.validation * n + 0.5)));
    auto it = members.begin();
    s.train.insert(s.train.end(), it, it + static_cast<std::ptrdiff_t>(n_train));
    it += static_cast<std::ptrdiff_t>(n_train);
    s.validation.insert(s.validation.end(), it, it + static_cast<std::ptrdiff_t>(n_val));
    it += static_cast<std::ptrdiff_t>(n_val);
    s.test.insert(s.test.end(), it, members.end());
  }
  for (auto* part : {&s.train, &s.validation, &s.test}) std::shuffle(part->begin(), part->end(), rng);
  return s;
}

DatasetSplit split(std::span<const EventRecord> records, SplitFractions fractions, std::uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(r.label);
  return split(labels, fractions, seed);
}

std::vector<EventRecord> subset(std::span<const EventRecord> records, std::span<const std::size_t> indices) {
  std::vector<EventRecord> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    if (i >= records.size()) throw DimensionError("subset: index out of range");
    out.push_back(records[i]);
  }
  return out;
}

std::string content_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for hashing: " + path.string());
  const auto size = std::filesystem::file_size(path);
  const std::string prefix = "blob " + std::to_string(size) + std::string(1, '\0');

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1) throw RuntimeError("SHA-1 unavailable");
  EVP_DigestUpdate(ctx.get(), prefix.data(), prefix.size());
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

}  // namespace qvit::data
