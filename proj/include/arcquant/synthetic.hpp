// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic activations: a unit-variance Gaussian base with a few
// channels amplified, mimicking the outlier-channel pattern of LLM
// activations. Draws use std::mt19937_64 bits with explicit transforms so the
// bytes are identical on every standard library.

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <vector>

#include "arcquant/format.hpp"

namespace arcquant {

class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return double(engine_() >> 11) * 0x1p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }

  /// Standard normal via Box-Muller.
  double normal();

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// `count` distinct channels out of K, sorted ascending.
std::vector<Index> synthetic_outlier_channels(Index k, Index count, std::uint64_t seed);

/// N x K activations; the channels from synthetic_outlier_channels(K,
/// outlier_channels, seed) are multiplied by outlier_scale.
Eigen::MatrixXd gen_synthetic(Index k, Index n, Index outlier_channels, double outlier_scale, std::uint64_t seed);

/// rows x cols standard normal matrix.
Eigen::MatrixXd gaussian_matrix(Index rows, Index cols, std::uint64_t seed);

}  // namespace arcquant
