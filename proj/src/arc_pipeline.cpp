// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include "arcquant/arc_pipeline.hpp"

#include <algorithm>
#include <stdexcept>

#include "arcquant/refgemm.hpp"

namespace arcquant {
namespace {

// Columns [first_block * g, (first_block + count) * g) as a plain tensor.
QuantizedTensor slice_blocks(const QuantizedTensor& q, Index first_block, Index count) {
  const Index g = q.format.block_size;
  QuantizedTensor out;
  out.format = q.format;
  out.tensor_scale = q.tensor_scale;
  out.codes = q.codes.middleCols(first_block * g, count * g);
  out.block_scales = q.block_scales.middleCols(first_block, count);
  out.cols = count * g;
  out.layout = ChannelLayout{LayoutKind::Contiguous, count * g, 0};
  return out;
}

// Physical block order of the interleaved layout, indexed by physical slot.
std::vector<Index> interleaved_block_order(Index primary_blocks, Index outlier_blocks) {
  std::vector<Index> order;
  order.reserve(static_cast<std::size_t>(primary_blocks + outlier_blocks));
  for (Index i = 0; i < outlier_blocks; ++i) {
    order.push_back(i);
    order.push_back(primary_blocks + i);
  }
  for (Index i = outlier_blocks; i < primary_blocks; ++i) order.push_back(i);
  return order;
}

QuantizedTensor permute_blocks(const QuantizedTensor& q, const std::vector<Index>& source_of_slot) {
  const Index g = q.format.block_size;
  QuantizedTensor out = q;
  for (std::size_t slot = 0; slot < source_of_slot.size(); ++slot) {
    const Index src = source_of_slot[slot];
    const Index dst = static_cast<Index>(slot);
    out.codes.middleCols(dst * g, g) = q.codes.middleCols(src * g, g);
    out.block_scales.col(dst) = q.block_scales.col(src);
  }
  return out;
}

void check_profile(const CalibrationProfile& profile, Index k_in) {
  if (profile.k_in() != k_in) throw std::invalid_argument("augmentation: channel count does not match the profile");
  if (profile.s < 0 || profile.s > profile.k_in()) throw std::invalid_argument("augmentation: S exceeds K_in");
}

}  // namespace

Index augmented_width(Index s, Index k_in, const FormatSpec& spec) {
  if (s <= 0) return 0;
  return std::min(padded_width(s, spec.block_size), padded_width(k_in, spec.block_size));
}

QuantizedTensor concat_columns(const QuantizedTensor& left, const QuantizedTensor& right) {
  if (!(left.format == right.format)) throw std::invalid_argument("concat_columns: format mismatch");
  if (left.rows() != right.rows()) throw std::invalid_argument("concat_columns: row mismatch");
  if (left.tensor_scale != right.tensor_scale) throw std::invalid_argument("concat_columns: tensor scale mismatch");
  if (left.layout.kind != LayoutKind::Contiguous || right.layout.kind != LayoutKind::Contiguous ||
      left.layout.outlier_cols != 0 || right.layout.outlier_cols != 0)
    throw std::invalid_argument("concat_columns: operands must be plain contiguous tensors");

  QuantizedTensor out;
  out.format = left.format;
  out.tensor_scale = left.tensor_scale;
  out.codes.resize(left.rows(), left.padded_cols() + right.padded_cols());
  out.codes << left.codes, right.codes;
  out.block_scales.resize(left.rows(), left.blocks() + right.blocks());
  out.block_scales << left.block_scales, right.block_scales;
  out.cols = left.padded_cols() + right.padded_cols();
  out.layout = ChannelLayout{LayoutKind::Contiguous, left.padded_cols(), right.padded_cols()};
  return out;
}

QuantizedTensor primary_part(const QuantizedTensor& augmented) {
  if (augmented.layout.kind != LayoutKind::Contiguous) throw std::invalid_argument("primary_part: tensor is interleaved");
  return slice_blocks(augmented, 0, augmented.layout.primary_cols / augmented.format.block_size);
}

QuantizedTensor residual_part(const QuantizedTensor& augmented) {
  if (augmented.layout.kind != LayoutKind::Contiguous) throw std::invalid_argument("residual_part: tensor is interleaved");
  const Index g = augmented.format.block_size;
  return slice_blocks(augmented, augmented.layout.primary_cols / g, augmented.layout.outlier_cols / g);
}

Eigen::MatrixXd exact_residuals(const Eigen::Ref<const Eigen::MatrixXd>& prepared, const QuantizedTensor& primary,
                                Index outliers) {
  if (outliers > primary.padded_cols()) throw std::invalid_argument("exact_residuals: S exceeds K_in");
  const Index region = std::min(outliers, prepared.cols());
  const Eigen::MatrixXd dq = dequantize_padded(primary);
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(prepared.rows(), outliers);
  r.leftCols(region) = prepared.leftCols(region) - dq.leftCols(region);
  return r;
}

AugmentedActivations quantize_activation_arc(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                             const CalibrationProfile& profile, const FormatSpec& spec,
                                             const ArcOptions& options) {
  check_profile(profile, x.cols());

  AugmentedActivations out;
  out.k_in = x.cols();
  out.outliers = augmented_width(profile.s, out.k_in, spec);
  out.reordered = out.outliers > 0;

  out.prepared = out.reordered ? apply_reorder(x, profile) : Eigen::MatrixXd(x);
  if (options.rmsnorm_weight) {
    const Eigen::VectorXd w = out.reordered ? reorder_channels(*options.rmsnorm_weight, profile)
                                            : *options.rmsnorm_weight;
    out.prepared = rmsnorm_rows(out.prepared, w, options.rmsnorm_eps);
  }

  const QuantizedTensor primary = quantize_tensor(out.prepared, spec);
  if (out.outliers == 0) {
    out.tensor = primary;
    out.residual.resize(x.rows(), 0);
    return out;
  }

  out.residual = exact_residuals(out.prepared, primary, out.outliers);
  const QuantizedTensor residual = quantize_tensor(out.residual, spec, QuantizeOptions{primary.tensor_scale});
  out.tensor = concat_columns(primary, residual);
  return out;
}

AugmentedWeights quantize_weight_arc(const Eigen::Ref<const Eigen::MatrixXd>& w, const CalibrationProfile& profile,
                                     const FormatSpec& spec) {
  check_profile(profile, w.cols());

  AugmentedWeights out;
  out.k_in = w.cols();
  out.outliers = augmented_width(profile.s, out.k_in, spec);
  out.reordered = out.outliers > 0;

  const QuantizedTensor primary = quantize_tensor(out.reordered ? apply_reorder(w, profile) : Eigen::MatrixXd(w), spec);
  if (out.outliers == 0) {
    out.tensor = primary;
    return out;
  }
  out.tensor = concat_columns(primary, slice_blocks(primary, 0, out.outliers / spec.block_size));
  return out;
}

QuantizedTensor to_interleaved(const QuantizedTensor& augmented) {
  if (augmented.layout.kind != LayoutKind::Contiguous) throw std::invalid_argument("to_interleaved: already interleaved");
  const Index g = augmented.format.block_size;
  const ChannelLayout& layout = augmented.layout;
  if (layout.outlier_cols % g != 0 || layout.primary_cols % g != 0)
    throw std::invalid_argument("to_interleaved: outlier count is not block aligned");
  if (layout.outlier_cols > layout.primary_cols) throw std::invalid_argument("to_interleaved: S exceeds K_in");

  QuantizedTensor out = permute_blocks(augmented, interleaved_block_order(layout.primary_cols / g, layout.outlier_cols / g));
  out.layout.kind = LayoutKind::Interleaved;
  return out;
}

QuantizedTensor from_interleaved(const QuantizedTensor& interleaved) {
  if (interleaved.layout.kind != LayoutKind::Interleaved)
    throw std::invalid_argument("from_interleaved: tensor is not interleaved");
  const Index g = interleaved.format.block_size;
  const auto order = interleaved_block_order(interleaved.layout.primary_cols / g, interleaved.layout.outlier_cols / g);
  std::vector<Index> inverse(order.size());
  for (std::size_t slot = 0; slot < order.size(); ++slot) inverse[static_cast<std::size_t>(order[slot])] = Index(slot);
  QuantizedTensor out = permute_blocks(interleaved, inverse);
  out.layout.kind = LayoutKind::Contiguous;
  return out;
}

AugmentedOperands to_interleaved(const AugmentedOperands& ops) {
  AugmentedOperands out = ops;
  out.act.tensor = to_interleaved(ops.act.tensor);
  out.wt.tensor = to_interleaved(ops.wt.tensor);
  return out;
}

AugmentedOperands from_interleaved(const AugmentedOperands& ops) {
  AugmentedOperands out = ops;
  out.act.tensor = from_interleaved(ops.act.tensor);
  out.wt.tensor = from_interleaved(ops.wt.tensor);
  return out;
}

SimulationResult simulate_linear_layer(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                       const Eigen::Ref<const Eigen::MatrixXd>& w, const CalibrationProfile& profile,
                                       const FormatSpec& spec, const ArcOptions& options) {
  if (x.cols() != w.cols()) throw std::invalid_argument("simulate_linear_layer: X and W disagree on K_in");

  SimulationResult result;
  result.operands.act = quantize_activation_arc(x, profile, spec, options);
  result.operands.wt = quantize_weight_arc(w, profile, spec);
  if (options.layout == LayoutKind::Interleaved) result.operands = to_interleaved(result.operands);

  result.y_hat = gemm_dequant(result.operands.act.tensor, result.operands.wt.tensor);
  const Eigen::MatrixXd x_ref =
      options.rmsnorm_weight ? rmsnorm_rows(x, *options.rmsnorm_weight, options.rmsnorm_eps) : Eigen::MatrixXd(x);
  result.y_exact = x_ref * w.transpose();

  const AugmentedActivations& act = result.operands.act;
  const QuantizedTensor contiguous =
      act.tensor.layout.kind == LayoutKind::Interleaved ? from_interleaved(act.tensor) : act.tensor;
  const QuantizedTensor primary = act.outliers > 0 ? primary_part(contiguous) : contiguous;

  BoundCheck check = check_single_stage(act.prepared, primary);
  Eigen::MatrixXd x_hat = dequantize_padded(primary).leftCols(act.k_in);
  const Index region = std::min(act.outliers, act.k_in);
  if (act.outliers > 0) {
    const QuantizedTensor residual = residual_part(contiguous);
    const BoundCheck dual = check_dual_stage(act.prepared, primary, residual, act.outliers);
    check.alpha = dual.alpha;
    check.checked += dual.checked;
    check.violations += dual.violations;
    check.max_error = std::max(check.max_error, dual.max_error);
    x_hat.leftCols(region) += dequantize_padded(residual).leftCols(region);
  }

  result.report = empirical_report(result.y_exact, result.y_hat, check);
  result.report.act_mse = column_mse(act.prepared, x_hat, 0, act.k_in);
  result.report.act_mse_compensated = column_mse(act.prepared, x_hat, 0, region);
  result.report.act_mse_uncompensated = column_mse(act.prepared, x_hat, region, act.k_in);
  return result;
}

}  // namespace arcquant
