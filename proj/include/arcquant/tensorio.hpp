// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0
//
// ARCT tensor container, little-endian throughout:
//
//   "ARCT" | version u32 | dtype u32 (0 = binary32) | ndim u32 | dims u64[ndim]
//   | payload binary32[prod(dims)], row-major
//
// A quantized tensor is written as its dequantized binary32 matrix followed
// by an "ARCQ" companion section holding the codes (one byte each), the
// block scales (binary32) and the tensor scale:
//
//   "ARCQ" | section bytes u64 | name length u32 | name | block size u64
//   | rows u64 | cols u64 | padded cols u64 | layout u8 | primary cols u64
//   | outlier cols u64 | has tensor scale u8 | tensor scale f32
//   | code count u64 | codes u8[] | scale count u64 | scales f32[]

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "arcquant/blockquant.hpp"

namespace arcquant {

inline constexpr std::uint32_t kTensorFileVersion = 1;
inline constexpr std::uint32_t kDtypeBinary32 = 0;

enum class TensorIoErrc {
  Io = 1,
  BadMagic,
  UnsupportedVersion,
  UnsupportedDtype,
  EmptyDims,
  Truncated,
  MissingSection,
  BadSection,
};

class TensorIoError : public std::runtime_error {
 public:
  TensorIoError(TensorIoErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  TensorIoErrc code() const noexcept { return code_; }

 private:
  TensorIoErrc code_;
};

struct TensorHeader {
  std::uint32_t version = kTensorFileVersion;
  std::uint32_t dtype = kDtypeBinary32;
  std::vector<std::uint64_t> dims;
};

/// Writes X as a 2-D binary32 tensor. Values are narrowed to float.
void write_tensor(const std::filesystem::path& path, const Eigen::Ref<const Eigen::MatrixXd>& x);

/// Reads a tensor as a matrix: 1-D becomes a single row, higher ranks fold
/// leading dimensions into rows.
Eigen::MatrixXd read_tensor(const std::filesystem::path& path);

TensorHeader read_header(const std::filesystem::path& path);

void write_quantized(const std::filesystem::path& path, const QuantizedTensor& q);
QuantizedTensor read_quantized(const std::filesystem::path& path);

}  // namespace arcquant
