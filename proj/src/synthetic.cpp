// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include "arcquant/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace arcquant {

double SeededRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 == 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::vector<Index> synthetic_outlier_channels(Index k, Index count, std::uint64_t seed) {
  if (count < 0 || count > k) throw std::invalid_argument("outlier channel count must lie in [0, K]");
  SeededRng rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<Index> pool(static_cast<std::size_t>(k));
  std::iota(pool.begin(), pool.end(), Index{0});
  for (Index i = 0; i < count; ++i) {
    const Index j = i + static_cast<Index>(rng.below(std::uint64_t(k - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  std::vector<Index> chosen(pool.begin(), pool.begin() + count);
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

Eigen::MatrixXd gaussian_matrix(Index rows, Index cols, std::uint64_t seed) {
  SeededRng rng(seed);
  Eigen::MatrixXd out(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) out(r, c) = rng.normal();
  return out;
}

Eigen::MatrixXd gen_synthetic(Index k, Index n, Index outlier_channels, double outlier_scale, std::uint64_t seed) {
  if (k <= 0 || n <= 0) throw std::invalid_argument("gen_synthetic: dimensions must be positive");
  Eigen::MatrixXd x = gaussian_matrix(n, k, seed);
  for (Index c : synthetic_outlier_channels(k, outlier_channels, seed)) x.col(c) *= outlier_scale;
  return x;
}

}  // namespace arcquant
