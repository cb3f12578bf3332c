// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0
//
// Block-scaled round-to-nearest quantization: every group of `block_size`
// elements along a row shares one scale s = max|x| / q_max (rounded up to the
// scale encoding), and codes are round(x / s). NVFP4 additionally divides by
// a per-tensor FP32 scale before block scaling.

#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "arcquant/format.hpp"

namespace arcquant {

using CodeMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class LayoutKind : std::uint8_t { Contiguous, Interleaved };

/// Column arrangement of a (possibly augmented) quantized tensor.
///
/// A plain tensor has outlier_cols == 0. An augmented tensor logically holds
/// [primary (primary_cols) | residual (outlier_cols)]; Interleaved stores the
/// outlier region as alternating primary/residual blocks followed by the
/// remaining primary blocks.
struct ChannelLayout {
  LayoutKind kind = LayoutKind::Contiguous;
  Index primary_cols = 0;
  Index outlier_cols = 0;

  friend bool operator==(const ChannelLayout&, const ChannelLayout&) = default;
};

struct QuantizedTensor {
  FormatSpec format;
  CodeMatrix codes;              // rows x padded columns, physical order
  Eigen::MatrixXd block_scales;  // rows x blocks, decoded, physical order
  std::optional<double> tensor_scale;
  Index cols = 0;  // logical columns; codes.cols() - cols are zero padding
  ChannelLayout layout;

  Index rows() const { return codes.rows(); }
  Index padded_cols() const { return codes.cols(); }
  Index blocks() const { return block_scales.cols(); }

  /// Block scale times the tensor scale, if any.
  double effective_scale(Index row, Index block) const {
    const double s = block_scales(row, block);
    return tensor_scale ? s * *tensor_scale : s;
  }

  ElementCode code(Index row, Index col) const { return {format.element, codes(row, col)}; }
};

/// Physical column holding logical column `logical`. The logical order of an
/// augmented tensor is [primary | residual].
Index physical_column(const QuantizedTensor& q, Index logical);

inline Index padded_width(Index k, Index g) { return (k + g - 1) / g * g; }

struct BlockQuantization {
  std::vector<std::uint8_t> codes;
  double scale = 0.0;      // decoded block scale
  double raw_scale = 0.0;  // max|x| / (q_max * tensor_scale); 0 for all-zero blocks

  /// Scale alignment factor; 1 for all-zero blocks.
  double alpha() const { return raw_scale > 0.0 ? scale / raw_scale : 1.0; }
};

/// Quantizes one block of exactly `spec.block_size` values.
BlockQuantization quantize_block(std::span<const double> x, const FormatSpec& spec,
                                 double tensor_scale = 1.0);

/// Per-tensor FP32 scale for two-level formats: the smallest float that maps
/// `global_max` to at most q_max * max(scale). Never below FLT_MIN.
double tensor_scale_for(double global_max, const FormatSpec& spec);

struct QuantizeOptions {
  /// Overrides the per-call tensor scale (calibration-fixed weights, or a
  /// residual sharing its primary's scale). Ignored by single-level formats.
  std::optional<double> tensor_scale;
};

/// Row-major blocking along columns; pads columns with zeros to a multiple
/// of the block size. Throws std::invalid_argument on an empty tensor and
/// std::domain_error on non-finite input.
QuantizedTensor quantize_tensor(const Eigen::Ref<const Eigen::MatrixXd>& x, const FormatSpec& spec,
                                const QuantizeOptions& options = {});

/// decode(code) * block_scale * tensor_scale for every stored column
/// (physical order, padding included).
Eigen::MatrixXd dequantize_padded(const QuantizedTensor& q);

/// Same as dequantize_padded but truncated to the logical columns.
Eigen::MatrixXd dequantize(const QuantizedTensor& q);

/// Largest |x| in each block of each row, matching quantize_tensor's blocking.
Eigen::MatrixXd block_maxima(const Eigen::Ref<const Eigen::MatrixXd>& x, Index block_size);

/// y_i = x_i / sqrt(mean(x^2) + eps) * w_i
template <typename DerivedX, typename DerivedW>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, 1> rmsnorm(const Eigen::MatrixBase<DerivedX>& x,
                                                                    const Eigen::MatrixBase<DerivedW>& w,
                                                                    typename DerivedX::Scalar eps) {
  using Scalar = typename DerivedX::Scalar;
  if (x.size() != w.size()) throw std::invalid_argument("rmsnorm: length mismatch");
  if (!(eps > Scalar(0))) throw std::invalid_argument("rmsnorm: eps must be positive");
  const Scalar mean_sq = x.squaredNorm() / Scalar(x.size());
  const Scalar inv = Scalar(1) / std::sqrt(mean_sq + eps);
  return (x.derived().reshaped().array() * inv * w.derived().reshaped().array()).matrix();
}

/// rmsnorm applied to every row of X.
template <typename DerivedX, typename DerivedW>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> rmsnorm_rows(
    const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedW>& w, typename DerivedX::Scalar eps) {
  Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) out.row(r) = rmsnorm(x.row(r).transpose(), w, eps).transpose();
  return out;
}

}  // namespace arcquant
