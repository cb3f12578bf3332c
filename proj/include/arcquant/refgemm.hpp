// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference GEMM over quantized operands. Each output element is a serial
// left-to-right double accumulation over the reduction dimension, so two
// routes that visit the same products in the same order agree bit for bit.

#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "arcquant/blockquant.hpp"

namespace arcquant {

enum class ReductionOrder : std::uint8_t {
  Logical,   // [primary | residual] channel order, independent of layout
  Physical,  // storage order
};

/// Y = dq(act) * dq(wt)^T with act (N x K) and wt (M x K).
Eigen::MatrixXd gemm_dequant(const QuantizedTensor& act, const QuantizedTensor& wt,
                             ReductionOrder order = ReductionOrder::Logical);

/// Q(X)Q(W)^T + Q(R)Q(W_o)^T from four separate operands. Per output the
/// primary products are accumulated first, then the residual products are
/// added to the same accumulator. An empty residual (zero columns) reduces
/// this to gemm_dequant(q_x, q_w).
Eigen::MatrixXd gemm_two_term(const QuantizedTensor& q_x, const QuantizedTensor& q_w, const QuantizedTensor& q_r,
                              const QuantizedTensor& q_wo);

/// Overload without a compensation term.
Eigen::MatrixXd gemm_two_term(const QuantizedTensor& q_x, const QuantizedTensor& q_w);

struct GemmShape {
  Index n = 0;  // activation rows
  Index k = 0;  // reduction dimension (K_in)
  Index m = 0;  // output features
};

struct CostEstimate {
  std::uint64_t flops = 0;
  double overhead_ratio = 0.0;
};

/// flops = 2 N (K_in + S) M, overhead = S / K_in.
CostEstimate cost_model(const GemmShape& shape, Index s);

}  // namespace arcquant
