// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include "arcquant/minifloat.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace arcquant {
namespace {

constexpr std::array<EncodingTraits, 7> kTraits = {{
    // name   bits e  m  bias  signed int   max       min normal   min positive
    {"E2M1", 4, 2, 1, 1, true, false, 6.0, 1.0, 0.5},
    {"E2M3", 6, 2, 3, 1, true, false, 7.5, 1.0, 0.125},
    {"E3M2", 6, 3, 2, 3, true, false, 28.0, 0.25, 0.0625},
    {"E4M3", 8, 4, 3, 7, true, false, 448.0, 0x1p-6, 0x1p-9},
    {"E5M2", 8, 5, 2, 15, true, false, 57344.0, 0x1p-14, 0x1p-16},
    {"E8M0", 8, 8, 0, 127, false, false, 0x1p127, 0x1p-127, 0x1p-127},
    {"INT4", 4, 0, 0, 0, true, true, 7.0, 1.0, 1.0},
}};

int floor_log2(double a) {
  int e = 0;
  std::frexp(a, &e);  // a = f * 2^e, f in [0.5, 1)
  return e - 1;
}

std::uint8_t sign_mask(const EncodingTraits& t) {
  return static_cast<std::uint8_t>(1u << (t.bits - 1));
}

// Assembles a floating code from an exponent and an integer significand q in
// [0, 2^(m+1)] measured in units of 2^(exp - m).
std::uint8_t pack_float(const EncodingTraits& t, int exp, long long q) {
  const long long implicit = 1LL << t.mantissa_bits;
  const int emin = 1 - t.bias;
  if (q == 2 * implicit) {
    q = implicit;
    ++exp;
  }
  unsigned field = 0;
  unsigned mantissa = 0;
  if (exp == emin && q < implicit) {
    field = 0;
    mantissa = static_cast<unsigned>(q);
  } else {
    field = static_cast<unsigned>(exp + t.bias);
    mantissa = static_cast<unsigned>(q - implicit);
  }
  return static_cast<std::uint8_t>((field << t.mantissa_bits) | mantissa);
}

std::uint8_t max_code(Encoding encoding) {
  switch (encoding) {
    case Encoding::E2M1: return 0x7;
    case Encoding::E2M3: return 0x1F;
    case Encoding::E3M2: return 0x1F;
    case Encoding::E4M3: return 0x7E;
    case Encoding::E5M2: return 0x7B;
    case Encoding::E8M0: return 0xFE;
    case Encoding::INT4: return 0x7;
  }
  return 0;
}

void require_finite(double x) {
  if (!std::isfinite(x)) throw std::domain_error("non-finite input to minifloat encoder");
}

}  // namespace

const EncodingTraits& traits(Encoding encoding) {
  return kTraits[static_cast<std::size_t>(encoding)];
}

double precision_limit(Encoding encoding) {
  const auto& t = traits(encoding);
  if (t.is_integer) return 1.0 / (2.0 * t.max_normal);
  return std::ldexp(1.0, -(t.mantissa_bits + 1));
}

double round_half_even(double v) {
  const double lo = std::floor(v);
  const double frac = v - lo;
  if (frac > 0.5) return lo + 1.0;
  if (frac < 0.5) return lo;
  return std::fmod(lo, 2.0) == 0.0 ? lo : lo + 1.0;
}

bool is_valid(ElementCode code) {
  const auto& t = traits(code.encoding);
  if (t.bits < 8 && code.bits >= (1u << t.bits)) return false;
  switch (code.encoding) {
    case Encoding::E4M3: return (code.bits & 0x7F) != 0x7F;
    case Encoding::E5M2: return ((code.bits >> 2) & 0x1F) != 0x1F;
    case Encoding::E8M0: return code.bits != 0xFF;
    default: return true;
  }
}

double decode(ElementCode code) {
  if (!is_valid(code)) {
    throw std::invalid_argument("invalid " + std::string(traits(code.encoding).name) +
                                " bit pattern " + std::to_string(code.bits));
  }
  const auto& t = traits(code.encoding);
  if (code.encoding == Encoding::E8M0) return std::ldexp(1.0, int(code.bits) - t.bias);
  if (t.is_integer) {
    const int v = code.bits & 0x7;
    return (code.bits & 0x8) ? double(v - 8) : double(v);
  }
  const unsigned magnitude = code.bits & (sign_mask(t) - 1u);
  const unsigned field = magnitude >> t.mantissa_bits;
  const unsigned mantissa = magnitude & ((1u << t.mantissa_bits) - 1u);
  double value = 0.0;
  if (field == 0) {
    value = std::ldexp(double(mantissa), 1 - t.bias - t.mantissa_bits);
  } else {
    value = std::ldexp(double((1u << t.mantissa_bits) | mantissa),
                       int(field) - t.bias - t.mantissa_bits);
  }
  return (code.bits & sign_mask(t)) ? -value : value;
}

ElementCode encode_nearest(double x, Encoding encoding, RoundingRule rule) {
  require_finite(x);
  const auto& t = traits(encoding);
  const bool negative = x < 0.0;
  double a = std::fabs(x);

  if (a > t.max_normal) {
    if (!rule.saturate) throw std::domain_error("value exceeds max normal without saturation");
    a = t.max_normal;
  }

  if (encoding == Encoding::E8M0) {
    if (!(x > 0.0)) throw std::domain_error("E8M0 encodes positive values only");
    const int e = floor_log2(a);
    if (e < -t.bias) return {encoding, 0};
    if (e >= t.bias) return {encoding, max_code(encoding)};
    const double lo = std::ldexp(1.0, e);
    const double hi = 2.0 * lo;
    const auto lo_code = static_cast<std::uint8_t>(e + t.bias);
    const double dlo = a - lo;
    const double dhi = hi - a;
    if (dlo < dhi) return {encoding, lo_code};
    if (dhi < dlo) return {encoding, static_cast<std::uint8_t>(lo_code + 1)};
    return {encoding, (lo_code & 1) ? static_cast<std::uint8_t>(lo_code + 1) : lo_code};
  }

  if (t.is_integer) {
    const double q = round_half_even(negative ? -a : a);
    const int qi = static_cast<int>(q);
    return {encoding, static_cast<std::uint8_t>(qi & 0xF)};
  }

  if (a == 0.0) return {encoding, 0};
  const int emin = 1 - t.bias;
  const int exp = std::max(floor_log2(a), emin);
  const double q = round_half_even(std::ldexp(a, t.mantissa_bits - exp));
  if (q == 0.0) return {encoding, 0};
  std::uint8_t bits = pack_float(t, exp, static_cast<long long>(q));
  if (bits > max_code(encoding)) bits = max_code(encoding);
  if (negative) bits |= sign_mask(t);
  return {encoding, bits};
}

ElementCode encode_scale_e8m0_up(double raw_scale) {
  require_finite(raw_scale);
  if (!(raw_scale > 0.0)) throw std::domain_error("scale must be positive");
  if (raw_scale > 0x1p127) throw std::out_of_range("scale exceeds E8M0 range");
  int e = 0;
  const double f = std::frexp(raw_scale, &e);
  int exp = (f == 0.5) ? e - 1 : e;
  exp = std::max(exp, -127);
  return {Encoding::E8M0, static_cast<std::uint8_t>(exp + 127)};
}

ElementCode encode_scale_e4m3_up(double raw_scale) {
  require_finite(raw_scale);
  if (!(raw_scale > 0.0)) throw std::domain_error("scale must be positive");
  if (raw_scale > 448.0) throw std::out_of_range("scale exceeds E4M3 range; tensor scale required");
  const auto& t = traits(Encoding::E4M3);
  if (raw_scale <= t.min_positive) return {Encoding::E4M3, 1};
  const int exp = std::max(floor_log2(raw_scale), 1 - t.bias);
  const double q = std::ceil(std::ldexp(raw_scale, t.mantissa_bits - exp));
  return {Encoding::E4M3, pack_float(t, exp, static_cast<long long>(q))};
}

std::vector<ElementCode> all_codes(Encoding encoding) {
  const auto& t = traits(encoding);
  std::vector<ElementCode> out;
  const unsigned count = 1u << t.bits;
  out.reserve(count);
  for (unsigned b = 0; b < count; ++b) {
    ElementCode c{encoding, static_cast<std::uint8_t>(b)};
    if (is_valid(c)) out.push_back(c);
  }
  return out;
}

}  // namespace arcquant
