// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

#include "arcquant/minifloat.hpp"

namespace arcquant {

using Index = Eigen::Index;

enum class ScaleEncoding : std::uint8_t { E8M0, E4M3, FP32 };

std::string_view to_string(ScaleEncoding scale);

/// A block-scaled numeric format: `block_size` elements share one scale of
/// type `scale`; `tensor_scale` adds a per-tensor FP32 factor on top.
struct FormatSpec {
  std::string name;
  Encoding element = Encoding::E2M1;
  Index block_size = 16;
  ScaleEncoding scale = ScaleEncoding::E4M3;
  bool tensor_scale = false;

  double q_max() const { return max_normal(element); }
  double epsilon() const { return precision_limit(element); }
  int element_bits() const { return traits(element).bits; }

  static FormatSpec nvfp4();
  static FormatSpec mxfp4();
  static FormatSpec mxfp6(Encoding element = Encoding::E2M3);
  static FormatSpec mxfp8(Encoding element = Encoding::E4M3);
  static FormatSpec int4(Index group = 128);

  friend bool operator==(const FormatSpec&, const FormatSpec&) = default;
};

/// Looks up nvfp4 | mxfp4 | mxfp6 | mxfp8 | int4 (plus the alternate
/// element variants mxfp6-e3m2 and mxfp8-e5m2). Throws std::invalid_argument.
FormatSpec format_by_name(std::string_view name);

/// Largest decoded value of a scale encoding (FP32 reports FLT_MAX).
double scale_max(ScaleEncoding scale);

/// Smallest positive decoded value; all-zero blocks get this scale.
double scale_min(ScaleEncoding scale);

/// Rounds a positive raw scale up to the next representable scale value.
double round_scale_up(double raw, ScaleEncoding scale);

/// One row of the block-format parameter table.
struct FormatTableRow {
  std::string format;
  int element_bits;
  std::string element_type;
  int bias;
  double max_normal;
  Index block_size;
  std::string scale_type;
  int scale_bits;
  std::string tensor_scale;
};

std::vector<FormatTableRow> format_table();

/// eps(E2M1)^2 == eps(E4M3): two 4-bit stages reach 8-bit resolution.
bool precision_identity_holds();

}  // namespace arcquant
