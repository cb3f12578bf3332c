// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0
//
// Augmented residual channels.
//
// Activations are reordered so the S outlier channels come first, quantized
// once (primary stage), and the stage-1 error of those S channels is
// quantized again with fresh block scales and appended along K:
//
//   act = [Q_X | Q_R],   wt = [Q_W | Q_W[:, :S]]
//
// so a single GEMM over K_in + S columns yields Q(X)Q(W)^T + Q(R)Q(W_o)^T.

#pragma once

#include <Eigen/Core>

#include <optional>

#include "arcquant/analysis.hpp"
#include "arcquant/blockquant.hpp"
#include "arcquant/calibration.hpp"

namespace arcquant {

struct ArcOptions {
  std::optional<Eigen::VectorXd> rmsnorm_weight;  // original channel order
  double rmsnorm_eps = 1e-6;
  LayoutKind layout = LayoutKind::Contiguous;  // used by simulate_linear_layer
};

/// Activation half of the augmented operands.
struct AugmentedActivations {
  QuantizedTensor tensor;    // [Q_X | Q_R] sharing one tensor scale
  Eigen::MatrixXd prepared;  // reordered (and normalized) real activations
  Eigen::MatrixXd residual;  // R_o = X_o - dq(Q_X)_o, real, rows x outliers
  Index k_in = 0;
  Index outliers = 0;        // S rounded up to the block size, capped at padded K_in
  bool reordered = false;
};

/// Weight half: [Q_W | Q_W[:, :outliers]] with bitwise-copied codes and scales.
struct AugmentedWeights {
  QuantizedTensor tensor;
  Index k_in = 0;
  Index outliers = 0;
  bool reordered = false;
};

struct AugmentedOperands {
  AugmentedActivations act;
  AugmentedWeights wt;
};

/// Number of augmented columns actually materialized for `s` requested
/// outlier channels: s rounded up to the block size, at most the padded K_in.
Index augmented_width(Index s, Index k_in, const FormatSpec& spec);

/// Online activation path: reorder, optional RMSNorm, primary quantization,
/// residual quantization of the first S columns, concatenation along K.
/// With S == 0 no reordering is applied and the result is plain block
/// quantization of X.
AugmentedActivations quantize_activation_arc(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                             const CalibrationProfile& profile, const FormatSpec& spec,
                                             const ArcOptions& options = {});

/// Offline weight path. `w` is (out_features x K_in).
AugmentedWeights quantize_weight_arc(const Eigen::Ref<const Eigen::MatrixXd>& w, const CalibrationProfile& profile,
                                     const FormatSpec& spec);

/// Exact stage-1 residuals of the first `outliers` columns of `prepared`.
Eigen::MatrixXd exact_residuals(const Eigen::Ref<const Eigen::MatrixXd>& prepared, const QuantizedTensor& primary,
                                Index outliers);

/// Splits an augmented tensor (contiguous) back into its primary and residual parts.
QuantizedTensor primary_part(const QuantizedTensor& augmented);
QuantizedTensor residual_part(const QuantizedTensor& augmented);

/// Concatenates two quantized tensors along columns. Both must be
/// contiguous, share format, rows and tensor scale; `left` is taken at its
/// padded width. The result's layout records left as primary and right as
/// the outlier region.
QuantizedTensor concat_columns(const QuantizedTensor& left, const QuantizedTensor& right);

/// Reorders the blocks of an augmented tensor into [P0 R0 P1 R1 ... P_rest].
QuantizedTensor to_interleaved(const QuantizedTensor& augmented);
QuantizedTensor from_interleaved(const QuantizedTensor& interleaved);

AugmentedOperands to_interleaved(const AugmentedOperands& ops);
AugmentedOperands from_interleaved(const AugmentedOperands& ops);

struct SimulationResult {
  Eigen::MatrixXd y_hat;
  Eigen::MatrixXd y_exact;
  AugmentedOperands operands;
  ErrorReport report;
};

/// Runs one linear layer Y = X W^T through the augmented pipeline and
/// reports the output error against real arithmetic, plus the activation
/// reconstruction error split by channel class and the dual-stage bound
/// check on every compensated element.
SimulationResult simulate_linear_layer(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                       const Eigen::Ref<const Eigen::MatrixXd>& w, const CalibrationProfile& profile,
                                       const FormatSpec& spec, const ArcOptions& options = {});

}  // namespace arcquant
