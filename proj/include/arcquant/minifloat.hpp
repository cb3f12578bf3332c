// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bit-exact codecs for the element and scale encodings used by block-scaled
// formats: E2M1, E2M3, E3M2, E4M3, E5M2, E8M0 and signed INT4.

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace arcquant {

enum class Encoding : std::uint8_t { E2M1, E2M3, E3M2, E4M3, E5M2, E8M0, INT4 };

/// Static description of an encoding.
///
/// For the floating encodings `bias` is the exponent bias and subnormals are
/// encoded with a zero exponent field. E4M3 follows the OCP "FN" convention
/// (no infinities, a single NaN mantissa at the top exponent), E5M2 reserves
/// its top exponent for inf/NaN, E8M0 is an unsigned power of two with 0xFF
/// as NaN. INT4 is two's complement; its symmetric range is [-7, 7].
struct EncodingTraits {
  std::string_view name;
  int bits;
  int exponent_bits;
  int mantissa_bits;
  int bias;
  bool is_signed;
  bool is_integer;
  double max_normal;
  double min_normal;
  double min_positive;
};

const EncodingTraits& traits(Encoding encoding);

inline double max_normal(Encoding encoding) { return traits(encoding).max_normal; }

/// Precision limit 2^-(mantissa bits + 1). For INT4 this is 1/(2 q_max), the
/// half-step relative to the symmetric range.
double precision_limit(Encoding encoding);

struct ElementCode {
  Encoding encoding = Encoding::E2M1;
  std::uint8_t bits = 0;

  friend bool operator==(const ElementCode&, const ElementCode&) = default;
};

enum class RoundingMode : std::uint8_t { NearestTiesToEven };

struct RoundingRule {
  RoundingMode mode = RoundingMode::NearestTiesToEven;
  bool saturate = true;
};

/// True when `code` is a finite value of its encoding (NaN/Inf patterns and
/// bits above the declared width are invalid).
bool is_valid(ElementCode code);

/// Exact real value of a code. Throws std::invalid_argument on invalid codes.
double decode(ElementCode code);

/// Nearest code to `x`, ties to the code with an even trailing bit. A result
/// of magnitude zero is always the +0 code. With `saturate`, magnitudes above
/// max normal clamp to max normal; without it they throw std::domain_error.
/// Non-finite input throws std::domain_error. E8M0 requires x > 0.
ElementCode encode_nearest(double x, Encoding encoding, RoundingRule rule = {});

/// Smallest power of two >= raw_scale (clamped below at 2^-127).
ElementCode encode_scale_e8m0_up(double raw_scale);

/// Smallest E4M3 value >= raw_scale (clamped below at 2^-9). Throws
/// std::out_of_range above 448, which means a tensor scale is required.
ElementCode encode_scale_e4m3_up(double raw_scale);

/// Every valid code of an encoding, in raw-bit order.
std::vector<ElementCode> all_codes(Encoding encoding);

/// Round-half-to-even on integers, independent of the FP environment.
double round_half_even(double v);

}  // namespace arcquant
