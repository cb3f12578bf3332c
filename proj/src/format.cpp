// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include "arcquant/format.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace arcquant {

std::string_view to_string(ScaleEncoding scale) {
  switch (scale) {
    case ScaleEncoding::E8M0: return "E8M0";
    case ScaleEncoding::E4M3: return "E4M3";
    case ScaleEncoding::FP32: return "FP32";
  }
  return "?";
}

FormatSpec FormatSpec::nvfp4() { return {"nvfp4", Encoding::E2M1, 16, ScaleEncoding::E4M3, true}; }

FormatSpec FormatSpec::mxfp4() { return {"mxfp4", Encoding::E2M1, 32, ScaleEncoding::E8M0, false}; }

FormatSpec FormatSpec::mxfp6(Encoding element) {
  if (element != Encoding::E2M3 && element != Encoding::E3M2)
    throw std::invalid_argument("mxfp6 elements are E2M3 or E3M2");
  return {element == Encoding::E2M3 ? "mxfp6" : "mxfp6-e3m2", element, 32, ScaleEncoding::E8M0, false};
}

FormatSpec FormatSpec::mxfp8(Encoding element) {
  if (element != Encoding::E4M3 && element != Encoding::E5M2)
    throw std::invalid_argument("mxfp8 elements are E4M3 or E5M2");
  return {element == Encoding::E4M3 ? "mxfp8" : "mxfp8-e5m2", element, 32, ScaleEncoding::E8M0, false};
}

FormatSpec FormatSpec::int4(Index group) {
  if (group <= 0) throw std::invalid_argument("int4 group size must be positive");
  return {"int4", Encoding::INT4, group, ScaleEncoding::FP32, false};
}

FormatSpec format_by_name(std::string_view name) {
  if (name == "nvfp4") return FormatSpec::nvfp4();
  if (name == "mxfp4") return FormatSpec::mxfp4();
  if (name == "mxfp6") return FormatSpec::mxfp6();
  if (name == "mxfp6-e3m2") return FormatSpec::mxfp6(Encoding::E3M2);
  if (name == "mxfp8") return FormatSpec::mxfp8();
  if (name == "mxfp8-e5m2") return FormatSpec::mxfp8(Encoding::E5M2);
  if (name == "int4") return FormatSpec::int4();
  throw std::invalid_argument("unknown format '" + std::string(name) + "'");
}

double scale_max(ScaleEncoding scale) {
  switch (scale) {
    case ScaleEncoding::E8M0: return max_normal(Encoding::E8M0);
    case ScaleEncoding::E4M3: return max_normal(Encoding::E4M3);
    case ScaleEncoding::FP32: return std::numeric_limits<float>::max();
  }
  return 0.0;
}

double scale_min(ScaleEncoding scale) {
  switch (scale) {
    case ScaleEncoding::E8M0: return traits(Encoding::E8M0).min_positive;
    case ScaleEncoding::E4M3: return traits(Encoding::E4M3).min_positive;
    case ScaleEncoding::FP32: return std::numeric_limits<float>::denorm_min();
  }
  return 0.0;
}

double round_scale_up(double raw, ScaleEncoding scale) {
  switch (scale) {
    case ScaleEncoding::E8M0: return decode(encode_scale_e8m0_up(raw));
    case ScaleEncoding::E4M3: return decode(encode_scale_e4m3_up(raw));
    case ScaleEncoding::FP32: {
      if (!(raw > 0.0) || !std::isfinite(raw)) throw std::domain_error("scale must be positive");
      if (raw > scale_max(scale)) throw std::out_of_range("scale exceeds FP32 range");
      float f = static_cast<float>(raw);
      if (static_cast<double>(f) < raw) f = std::nextafter(f, std::numeric_limits<float>::infinity());
      if (f == 0.0f) f = std::numeric_limits<float>::denorm_min();
      return f;
    }
  }
  return raw;
}

std::vector<FormatTableRow> format_table() {
  auto row = [](std::string name, const FormatSpec& spec) {
    const auto& el = traits(spec.element);
    std::string element_type = "FP" + std::to_string(el.bits) + " (" + std::string(el.name) + ")";
    return FormatTableRow{std::move(name), el.bits, std::move(element_type), el.bias, el.max_normal,
                          spec.block_size, std::string(to_string(spec.scale)), 8,
                          spec.tensor_scale ? "FP32" : "N/A"};
  };
  return {
      row("MXFP8", FormatSpec::mxfp8(Encoding::E5M2)),
      row("MXFP8", FormatSpec::mxfp8(Encoding::E4M3)),
      row("MXFP6", FormatSpec::mxfp6(Encoding::E3M2)),
      row("MXFP6", FormatSpec::mxfp6(Encoding::E2M3)),
      row("MXFP4", FormatSpec::mxfp4()),
      row("NVFP4", FormatSpec::nvfp4()),
  };
}

bool precision_identity_holds() {
  const double e4 = FormatSpec::nvfp4().epsilon();
  const double e8 = FormatSpec::mxfp8().epsilon();
  return e4 * e4 == e8;
}

}  // namespace arcquant
