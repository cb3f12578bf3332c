// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include "arcquant/baselines.hpp"

#include <algorithm>
#include <random>

#include "arcquant/arc_pipeline.hpp"
#include "arcquant/refgemm.hpp"

namespace arcquant {

HadamardTransform HadamardTransform::randomized(Index dim, std::uint64_t seed) {
  if (!is_power_of_two(dim)) throw std::invalid_argument("Hadamard dimension must be a power of two");
  std::mt19937_64 rng(seed);
  HadamardTransform t;
  t.dim = dim;
  t.signs.resize(dim);
  for (Index i = 0; i < dim; ++i) t.signs(i) = (rng() >> 63) ? -1.0 : 1.0;
  return t;
}

HadamardTransform HadamardTransform::plain(Index dim) {
  if (!is_power_of_two(dim)) throw std::invalid_argument("Hadamard dimension must be a power of two");
  return HadamardTransform{dim, Eigen::VectorXd::Ones(dim)};
}

Eigen::MatrixXd HadamardTransform::matrix() const {
  return hadamard_apply(Eigen::MatrixXd::Identity(dim, dim), *this);
}

Eigen::MatrixXd hadamard_apply_prefix(const Eigen::Ref<const Eigen::MatrixXd>& x, std::uint64_t seed) {
  if (x.cols() == 0) return x;
  Index prefix = 1;
  while (prefix * 2 <= x.cols()) prefix *= 2;
  Eigen::MatrixXd out = x;
  out.leftCols(prefix) = hadamard_apply(x.leftCols(prefix), HadamardTransform::randomized(prefix, seed));
  return out;
}

Eigen::VectorXd smooth_scales(const Eigen::Ref<const Eigen::VectorXd>& x_colmax,
                              const Eigen::Ref<const Eigen::VectorXd>& w_colmax, double alpha) {
  if (x_colmax.size() != w_colmax.size()) throw std::invalid_argument("smooth_scales: length mismatch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("smooth_scales: alpha must lie in [0, 1]");
  Eigen::VectorXd s(x_colmax.size());
  for (Index j = 0; j < s.size(); ++j) {
    if (x_colmax(j) < 0.0 || w_colmax(j) < 0.0) throw std::invalid_argument("smooth_scales: negative maximum");
    if (x_colmax(j) == 0.0 || w_colmax(j) == 0.0) {
      s(j) = 1.0;
      continue;
    }
    s(j) = std::pow(x_colmax(j), alpha) / std::pow(w_colmax(j), 1.0 - alpha);
  }
  return s;
}

double mean_block_range(const Eigen::Ref<const Eigen::MatrixXd>& x, Index block_size,
                        const std::vector<Index>& excluded_channels) {
  const Eigen::MatrixXd ranges = block_maxima(x, block_size);
  std::vector<bool> skip(static_cast<std::size_t>(ranges.cols()), false);
  for (Index c : excluded_channels) skip[static_cast<std::size_t>(c / block_size)] = true;
  double sum = 0.0;
  Index count = 0;
  for (Index r = 0; r < ranges.rows(); ++r) {
    for (Index b = 0; b < ranges.cols(); ++b) {
      if (skip[static_cast<std::size_t>(b)]) continue;
      sum += ranges(r, b);
      ++count;
    }
  }
  return count > 0 ? sum / double(count) : 0.0;
}

Eigen::MatrixXd rtn_linear(const Eigen::Ref<const Eigen::MatrixXd>& x, const Eigen::Ref<const Eigen::MatrixXd>& w,
                           const FormatSpec& spec) {
  if (x.cols() != w.cols()) throw std::invalid_argument("rtn_linear: X and W disagree on K_in");
  return gemm_dequant(quantize_tensor(x, spec), quantize_tensor(w, spec));
}

std::vector<MethodResult> compare_methods(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                          const Eigen::Ref<const Eigen::MatrixXd>& w, const FormatSpec& spec,
                                          const CalibrationProfile& profile, const CompareOptions& options) {
  if (x.cols() != w.cols()) throw std::invalid_argument("compare_methods: X and W disagree on K_in");
  const Eigen::MatrixXd y = x * w.transpose();
  std::vector<MethodResult> out;

  {
    const QuantizedTensor qx = quantize_tensor(x, spec);
    const Eigen::MatrixXd y_hat = gemm_dequant(qx, quantize_tensor(w, spec));
    out.push_back({"rtn", empirical_report(y, y_hat, check_single_stage(x, qx))});
  }
  {
    const Eigen::VectorXd s = smooth_scales(x.cwiseAbs().colwise().maxCoeff().transpose(),
                                            w.cwiseAbs().colwise().maxCoeff().transpose(), options.alpha);
    const Eigen::MatrixXd xs = x * s.cwiseInverse().asDiagonal();
    const Eigen::MatrixXd ws = w * s.asDiagonal();
    const QuantizedTensor qx = quantize_tensor(xs, spec);
    const Eigen::MatrixXd y_hat = gemm_dequant(qx, quantize_tensor(ws, spec));
    out.push_back({"smooth", empirical_report(y, y_hat, check_single_stage(xs, qx))});
  }
  {
    const Eigen::MatrixXd xr = hadamard_apply_prefix(x, options.seed);
    const Eigen::MatrixXd wr = hadamard_apply_prefix(w, options.seed);
    const QuantizedTensor qx = quantize_tensor(xr, spec);
    const Eigen::MatrixXd y_hat = gemm_dequant(qx, quantize_tensor(wr, spec));
    out.push_back({"hadamard", empirical_report(y, y_hat, check_single_stage(xr, qx))});
  }
  {
    ArcOptions arc;
    arc.layout = options.layout;
    out.push_back({"arcquant", simulate_linear_layer(x, w, profile, spec, arc).report});
  }
  return out;
}

}  // namespace arcquant
