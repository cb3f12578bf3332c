// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include "arcquant/blockquant.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace arcquant {
namespace {

std::array<double, 256> decode_table(Encoding encoding) {
  std::array<double, 256> table;
  table.fill(std::numeric_limits<double>::quiet_NaN());
  for (const auto& c : all_codes(encoding)) table[c.bits] = decode(c);
  return table;
}

}  // namespace

BlockQuantization quantize_block(std::span<const double> x, const FormatSpec& spec, double tensor_scale) {
  if (static_cast<Index>(x.size()) != spec.block_size)
    throw std::invalid_argument("quantize_block: block length must equal the format block size");
  if (!(tensor_scale > 0.0)) throw std::invalid_argument("quantize_block: tensor scale must be positive");

  double block_max = 0.0;
  for (double v : x) {
    if (!std::isfinite(v)) throw std::domain_error("quantize_block: non-finite input");
    block_max = std::max(block_max, std::fabs(v));
  }

  BlockQuantization out;
  out.codes.assign(x.size(), 0);
  if (block_max == 0.0) {
    out.scale = scale_min(spec.scale);
    return out;
  }

  out.raw_scale = block_max / (spec.q_max() * tensor_scale);
  out.scale = round_scale_up(out.raw_scale, spec.scale);
  const double effective = out.scale * tensor_scale;
  for (std::size_t i = 0; i < x.size(); ++i) out.codes[i] = encode_nearest(x[i] / effective, spec.element).bits;
  return out;
}

double tensor_scale_for(double global_max, const FormatSpec& spec) {
  if (!spec.tensor_scale) return 1.0;
  const double target = spec.q_max() * scale_max(spec.scale);
  const float inf = std::numeric_limits<float>::infinity();
  float ts = static_cast<float>(global_max / target);
  if (static_cast<double>(ts) < global_max / target) ts = std::nextafter(ts, inf);
  ts = std::max(ts, std::numeric_limits<float>::min());
  while (global_max / (spec.q_max() * static_cast<double>(ts)) > scale_max(spec.scale)) ts = std::nextafter(ts, inf);
  return ts;
}

QuantizedTensor quantize_tensor(const Eigen::Ref<const Eigen::MatrixXd>& x, const FormatSpec& spec,
                                const QuantizeOptions& options) {
  if (x.rows() == 0 || x.cols() == 0) throw std::invalid_argument("quantize_tensor: empty tensor");
  if (!x.allFinite()) throw std::domain_error("quantize_tensor: non-finite input");

  const Index g = spec.block_size;
  const Index padded = padded_width(x.cols(), g);
  const Index blocks = padded / g;

  QuantizedTensor q;
  q.format = spec;
  q.cols = x.cols();
  q.codes = CodeMatrix::Zero(x.rows(), padded);
  q.block_scales.resize(x.rows(), blocks);
  q.layout = ChannelLayout{LayoutKind::Contiguous, padded, 0};

  double ts = 1.0;
  if (spec.tensor_scale) {
    ts = options.tensor_scale ? *options.tensor_scale : tensor_scale_for(x.cwiseAbs().maxCoeff(), spec);
    q.tensor_scale = ts;
  }

  std::vector<double> buffer(static_cast<std::size_t>(g));
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index b = 0; b < blocks; ++b) {
      for (Index i = 0; i < g; ++i) {
        const Index c = b * g + i;
        buffer[static_cast<std::size_t>(i)] = c < x.cols() ? x(r, c) : 0.0;
      }
      const BlockQuantization bq = quantize_block(buffer, spec, ts);
      for (Index i = 0; i < g; ++i) q.codes(r, b * g + i) = bq.codes[static_cast<std::size_t>(i)];
      q.block_scales(r, b) = bq.scale;
    }
  }
  return q;
}

Eigen::MatrixXd dequantize_padded(const QuantizedTensor& q) {
  const auto table = decode_table(q.format.element);
  const Index g = q.format.block_size;
  Eigen::MatrixXd out(q.rows(), q.padded_cols());
  for (Index r = 0; r < q.rows(); ++r) {
    for (Index c = 0; c < q.padded_cols(); ++c) {
      double v = table[q.codes(r, c)] * q.block_scales(r, c / g);
      if (q.tensor_scale) v *= *q.tensor_scale;
      out(r, c) = v;
    }
  }
  return out;
}

Eigen::MatrixXd dequantize(const QuantizedTensor& q) { return dequantize_padded(q).leftCols(q.cols); }

Index physical_column(const QuantizedTensor& q, Index logical) {
  if (q.layout.kind == LayoutKind::Contiguous) return logical;
  const Index g = q.format.block_size;
  const Index block = logical / g;
  const Index offset = logical % g;
  const Index outlier_blocks = q.layout.outlier_cols / g;
  const Index primary_blocks = q.layout.primary_cols / g;
  Index physical = 0;
  if (block < outlier_blocks) {
    physical = 2 * block;
  } else if (block < primary_blocks) {
    physical = block + outlier_blocks;
  } else {
    physical = 2 * (block - primary_blocks) + 1;
  }
  return physical * g + offset;
}

Eigen::MatrixXd block_maxima(const Eigen::Ref<const Eigen::MatrixXd>& x, Index block_size) {
  const Index blocks = padded_width(x.cols(), block_size) / block_size;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), blocks);
  for (Index r = 0; r < x.rows(); ++r)
    for (Index c = 0; c < x.cols(); ++c) out(r, c / block_size) = std::max(out(r, c / block_size), std::fabs(x(r, c)));
  return out;
}

}  // namespace arcquant
