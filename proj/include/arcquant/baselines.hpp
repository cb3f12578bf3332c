// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0
//
// Comparison transforms for a single linear layer: plain RTN, SmoothQuant-style
// channel smoothing, randomized Hadamard rotation, and the augmented pipeline.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "arcquant/analysis.hpp"
#include "arcquant/calibration.hpp"

namespace arcquant {

/// x -> x * diag(signs) * H / sqrt(dim), H the Sylvester Hadamard matrix.
struct HadamardTransform {
  Index dim = 0;
  Eigen::VectorXd signs;  // +-1

  /// Random sign diagonal drawn from `seed`. dim must be a power of two.
  static HadamardTransform randomized(Index dim, std::uint64_t seed);
  static HadamardTransform plain(Index dim);

  /// Dense orthonormal matrix of the transform (dim x dim).
  Eigen::MatrixXd matrix() const;
};

inline bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

/// In-place unnormalized fast Walsh-Hadamard transform of each row.
template <typename Derived>
void fwht_rows(Eigen::MatrixBase<Derived>& x) {
  const Index n = x.cols();
  if (!is_power_of_two(n)) throw std::invalid_argument("fwht: length must be a power of two");
  for (Index len = 1; len < n; len <<= 1) {
    for (Index i = 0; i < n; i += len << 1) {
      for (Index j = i; j < i + len; ++j) {
        const auto a = x.col(j).eval();
        const auto b = x.col(j + len).eval();
        x.col(j) = a + b;
        x.col(j + len) = a - b;
      }
    }
  }
}

/// Rotates the columns of X. X.cols() must equal t.dim. Applying the same
/// transform to W preserves X W^T.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> hadamard_apply(
    const Eigen::MatrixBase<Derived>& x, const HadamardTransform& t) {
  using Scalar = typename Derived::Scalar;
  if (x.cols() != t.dim) throw std::invalid_argument("hadamard_apply: width does not match the transform");
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out = x * t.signs.cast<Scalar>().asDiagonal();
  fwht_rows(out);
  out /= std::sqrt(Scalar(t.dim));
  return out;
}

/// Rotates the largest power-of-two prefix of the columns and leaves the
/// tail untouched, for widths that are not a power of two.
Eigen::MatrixXd hadamard_apply_prefix(const Eigen::Ref<const Eigen::MatrixXd>& x, std::uint64_t seed);

/// s_j = xmax_j^alpha / wmax_j^(1 - alpha); a zero maximum forces s_j = 1.
Eigen::VectorXd smooth_scales(const Eigen::Ref<const Eigen::VectorXd>& x_colmax,
                              const Eigen::Ref<const Eigen::VectorXd>& w_colmax, double alpha);

/// Mean over rows and blocks of the per-block max |x|, skipping every block
/// that contains one of `excluded_channels`.
double mean_block_range(const Eigen::Ref<const Eigen::MatrixXd>& x, Index block_size,
                        const std::vector<Index>& excluded_channels);

struct CompareOptions {
  double alpha = 0.5;       // smoothing strength
  std::uint64_t seed = 0;   // Hadamard sign diagonal
  LayoutKind layout = LayoutKind::Contiguous;
};

struct MethodResult {
  std::string method;  // rtn | smooth | hadamard | arcquant
  ErrorReport report;
};

/// Quantized output error of every method against the exact X W^T.
std::vector<MethodResult> compare_methods(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                          const Eigen::Ref<const Eigen::MatrixXd>& w, const FormatSpec& spec,
                                          const CalibrationProfile& profile, const CompareOptions& options = {});

/// Plain RTN of both operands followed by the reference GEMM.
Eigen::MatrixXd rtn_linear(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& w,
                           const FormatSpec& spec);

}  // namespace arcquant
