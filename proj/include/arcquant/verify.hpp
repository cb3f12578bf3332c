// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded invariant suite behind `arcquant verify-bounds`.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arcquant/format.hpp"

namespace arcquant {

struct SuiteOptions {
  Index samples = 1'000'000;  // elements (or scale draws) per statistical check
  Index gemm_configs = 100;   // random (N, K_in, M, S) shapes for the GEMM checks
  std::uint64_t seed = 0;
  bool inject_fault = false;  // negative control: corrupts one stage of every check
};

struct SuiteCheck {
  std::string name;
  Index checked = 0;
  Index violations = 0;
  std::string detail;

  bool passed() const { return checked > 0 && violations == 0; }
};

/// E8M0 and E4M3 scale alignment ranges, single-stage MXFP8 compliance,
/// dual-stage NVFP4 compliance, fused-GEMM equivalence and layout invariance.
std::vector<SuiteCheck> run_bound_suite(const SuiteOptions& options);

/// Alpha of a single E8M0 round-up: must lie in [1, 2).
double e8m0_alpha(double raw_scale);
/// Alpha of a single E4M3 round-up: in [1, 1.125] for normal raw scales.
double e4m3_alpha(double raw_scale);

nlohmann::json to_json(const SuiteCheck& check);

}  // namespace arcquant
