// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include "arcquant/refgemm.hpp"

#include <stdexcept>
#include <vector>

namespace arcquant {
namespace {

void check_pair(const QuantizedTensor& a, const QuantizedTensor& b) {
  if (!(a.format == b.format)) throw std::invalid_argument("gemm: operand formats differ");
  if (a.padded_cols() != b.padded_cols()) throw std::invalid_argument("gemm: reduction dimensions differ");
}

std::vector<Index> column_order(const QuantizedTensor& q, ReductionOrder order) {
  std::vector<Index> cols(static_cast<std::size_t>(q.padded_cols()));
  for (Index k = 0; k < q.padded_cols(); ++k)
    cols[static_cast<std::size_t>(k)] = order == ReductionOrder::Logical ? physical_column(q, k) : k;
  return cols;
}

// acc(n, m) += sum_k a(n, ka[k]) * b(m, kb[k]), serially in k.
void accumulate(Eigen::MatrixXd& acc, const Eigen::MatrixXd& a, const std::vector<Index>& ka, const Eigen::MatrixXd& b,
                const std::vector<Index>& kb) {
  for (Index n = 0; n < acc.rows(); ++n) {
    for (Index m = 0; m < acc.cols(); ++m) {
      double sum = acc(n, m);
      for (std::size_t k = 0; k < ka.size(); ++k) sum += a(n, ka[k]) * b(m, kb[k]);
      acc(n, m) = sum;
    }
  }
}

}  // namespace

Eigen::MatrixXd gemm_dequant(const QuantizedTensor& act, const QuantizedTensor& wt, ReductionOrder order) {
  check_pair(act, wt);
  if (order == ReductionOrder::Logical && act.layout.primary_cols != wt.layout.primary_cols)
    throw std::invalid_argument("gemm: operands disagree on the augmented split");
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(act.rows(), wt.rows());
  accumulate(y, dequantize_padded(act), column_order(act, order), dequantize_padded(wt), column_order(wt, order));
  return y;
}

Eigen::MatrixXd gemm_two_term(const QuantizedTensor& q_x, const QuantizedTensor& q_w, const QuantizedTensor& q_r,
                              const QuantizedTensor& q_wo) {
  check_pair(q_x, q_w);
  if (q_x.rows() != q_r.rows() && q_r.padded_cols() != 0) throw std::invalid_argument("gemm: residual row mismatch");
  if (q_w.rows() != q_wo.rows() && q_wo.padded_cols() != 0) throw std::invalid_argument("gemm: weight row mismatch");
  if (q_r.padded_cols() != q_wo.padded_cols()) throw std::invalid_argument("gemm: compensation widths differ");

  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(q_x.rows(), q_w.rows());
  const auto primary = column_order(q_x, ReductionOrder::Physical);
  accumulate(y, dequantize_padded(q_x), primary, dequantize_padded(q_w), primary);
  if (q_r.padded_cols() > 0) {
    if (!(q_r.format == q_x.format) || !(q_wo.format == q_w.format))
      throw std::invalid_argument("gemm: compensation format mismatch");
    const auto residual = column_order(q_r, ReductionOrder::Physical);
    accumulate(y, dequantize_padded(q_r), residual, dequantize_padded(q_wo), residual);
  }
  return y;
}

Eigen::MatrixXd gemm_two_term(const QuantizedTensor& q_x, const QuantizedTensor& q_w) {
  QuantizedTensor none;
  none.format = q_x.format;
  return gemm_two_term(q_x, q_w, none, none);
}

CostEstimate cost_model(const GemmShape& shape, Index s) {
  if (s < 0) throw std::invalid_argument("cost_model: negative S");
  if (shape.n <= 0 || shape.k <= 0 || shape.m <= 0) throw std::invalid_argument("cost_model: shape must be positive");
  CostEstimate out;
  out.flops = 2ULL * std::uint64_t(shape.n) * std::uint64_t(shape.k + s) * std::uint64_t(shape.m);
  out.overhead_ratio = double(s) / double(shape.k);
  return out;
}

}  // namespace arcquant
