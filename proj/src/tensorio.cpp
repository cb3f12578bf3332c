// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include "arcquant/tensorio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace arcquant {
namespace {

constexpr char kMagic[4] = {'A', 'R', 'C', 'T'};
constexpr char kQuantMagic[4] = {'A', 'R', 'C', 'Q'};

class ByteWriter {
 public:
  void raw(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + n);
  }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw TensorIoError(TensorIoErrc::Truncated, "tensor file truncated");
  }
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void raw(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TensorIoError(TensorIoErrc::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw TensorIoError(TensorIoErrc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw TensorIoError(TensorIoErrc::Io, "write failed for " + path.string());
}

void put_matrix(ByteWriter& w, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.rows() == 0 || x.cols() == 0) throw TensorIoError(TensorIoErrc::EmptyDims, "tensor has an empty dimension");
  w.raw(kMagic, 4);
  w.u32(kTensorFileVersion);
  w.u32(kDtypeBinary32);
  w.u32(2);
  w.u64(std::uint64_t(x.rows()));
  w.u64(std::uint64_t(x.cols()));
  for (Index r = 0; r < x.rows(); ++r)
    for (Index c = 0; c < x.cols(); ++c) w.f32(static_cast<float>(x(r, c)));
}

TensorHeader get_header(ByteReader& in) {
  char magic[4];
  in.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw TensorIoError(TensorIoErrc::BadMagic, "not an ARCT tensor file");
  TensorHeader h;
  h.version = in.u32();
  if (h.version != kTensorFileVersion)
    throw TensorIoError(TensorIoErrc::UnsupportedVersion, "unsupported ARCT version " + std::to_string(h.version));
  h.dtype = in.u32();
  if (h.dtype != kDtypeBinary32)
    throw TensorIoError(TensorIoErrc::UnsupportedDtype, "unsupported dtype code " + std::to_string(h.dtype));
  const std::uint32_t ndim = in.u32();
  if (ndim == 0) throw TensorIoError(TensorIoErrc::EmptyDims, "tensor has no dimensions");
  h.dims.resize(ndim);
  for (auto& d : h.dims) {
    d = in.u64();
    if (d == 0) throw TensorIoError(TensorIoErrc::EmptyDims, "tensor has an empty dimension");
  }
  return h;
}

Eigen::MatrixXd get_matrix(ByteReader& in, const TensorHeader& h) {
  std::uint64_t rows = 1;
  for (std::size_t i = 0; i + 1 < h.dims.size(); ++i) rows *= h.dims[i];
  const std::uint64_t cols = h.dims.back();
  if (cols != 0 && rows > in.remaining() / 4 / cols)
    throw TensorIoError(TensorIoErrc::Truncated, "tensor payload truncated");
  Eigen::MatrixXd x(static_cast<Index>(rows), static_cast<Index>(cols));
  for (Index r = 0; r < x.rows(); ++r)
    for (Index c = 0; c < x.cols(); ++c) x(r, c) = in.f32();
  return x;
}

}  // namespace

void write_tensor(const std::filesystem::path& path, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  ByteWriter w;
  put_matrix(w, x);
  spill(path, w.bytes());
}

TensorHeader read_header(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  ByteReader in(bytes);
  return get_header(in);
}

Eigen::MatrixXd read_tensor(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  ByteReader in(bytes);
  const TensorHeader h = get_header(in);
  return get_matrix(in, h);
}

void write_quantized(const std::filesystem::path& path, const QuantizedTensor& q) {
  ByteWriter w;
  put_matrix(w, dequantize_padded(q));

  ByteWriter s;
  s.u32(static_cast<std::uint32_t>(q.format.name.size()));
  s.raw(q.format.name.data(), q.format.name.size());
  s.u64(std::uint64_t(q.format.block_size));
  s.u64(std::uint64_t(q.rows()));
  s.u64(std::uint64_t(q.cols));
  s.u64(std::uint64_t(q.padded_cols()));
  s.u8(static_cast<std::uint8_t>(q.layout.kind));
  s.u64(std::uint64_t(q.layout.primary_cols));
  s.u64(std::uint64_t(q.layout.outlier_cols));
  s.u8(q.tensor_scale ? 1 : 0);
  s.f32(q.tensor_scale ? static_cast<float>(*q.tensor_scale) : 1.0f);
  s.u64(std::uint64_t(q.codes.size()));
  s.raw(q.codes.data(), static_cast<std::size_t>(q.codes.size()));
  s.u64(std::uint64_t(q.block_scales.size()));
  for (Index r = 0; r < q.block_scales.rows(); ++r)
    for (Index b = 0; b < q.block_scales.cols(); ++b) s.f32(static_cast<float>(q.block_scales(r, b)));

  w.raw(kQuantMagic, 4);
  w.u64(s.bytes().size());
  w.raw(s.bytes().data(), s.bytes().size());
  spill(path, w.bytes());
}

QuantizedTensor read_quantized(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  ByteReader in(bytes);
  const TensorHeader h = get_header(in);
  get_matrix(in, h);

  if (in.at_end()) throw TensorIoError(TensorIoErrc::MissingSection, "file has no quantized section");
  char magic[4];
  in.raw(magic, 4);
  if (std::memcmp(magic, kQuantMagic, 4) != 0) throw TensorIoError(TensorIoErrc::BadSection, "bad quantized section magic");
  const std::uint64_t length = in.u64();
  if (length != in.remaining()) throw TensorIoError(TensorIoErrc::BadSection, "quantized section length mismatch");

  std::string name(in.u32(), '\0');
  in.raw(name.data(), name.size());

  QuantizedTensor q;
  try {
    q.format = format_by_name(name);
  } catch (const std::invalid_argument&) {
    throw TensorIoError(TensorIoErrc::BadSection, "unknown format '" + name + "'");
  }
  q.format.block_size = static_cast<Index>(in.u64());
  const auto rows = static_cast<Index>(in.u64());
  q.cols = static_cast<Index>(in.u64());
  const auto padded = static_cast<Index>(in.u64());
  const std::uint8_t kind = in.u8();
  if (kind > 1) throw TensorIoError(TensorIoErrc::BadSection, "unknown layout");
  q.layout.kind = static_cast<LayoutKind>(kind);
  q.layout.primary_cols = static_cast<Index>(in.u64());
  q.layout.outlier_cols = static_cast<Index>(in.u64());
  const bool has_ts = in.u8() != 0;
  const float ts = in.f32();
  if (has_ts) q.tensor_scale = ts;

  const Index g = q.format.block_size;
  if (g <= 0 || padded % g != 0 || q.cols > padded)
    throw TensorIoError(TensorIoErrc::BadSection, "inconsistent quantized geometry");
  if (in.u64() != std::uint64_t(rows * padded)) throw TensorIoError(TensorIoErrc::BadSection, "code count mismatch");
  q.codes.resize(rows, padded);
  in.raw(q.codes.data(), static_cast<std::size_t>(q.codes.size()));
  if (in.u64() != std::uint64_t(rows * (padded / g))) throw TensorIoError(TensorIoErrc::BadSection, "scale count mismatch");
  q.block_scales.resize(rows, padded / g);
  for (Index r = 0; r < rows; ++r)
    for (Index b = 0; b < padded / g; ++b) q.block_scales(r, b) = in.f32();
  return q;
}

}  // namespace arcquant
