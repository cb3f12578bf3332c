// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0
//
// Error metrics and worst-case bounds.
//
// With M the dynamic range of a block, alpha = s / M >= 1 the scale
// alignment overhead and eps the element precision limit, a single RTN stage
// errs by at most alpha * M * eps. For MXFP8 (E8M0 scales, alpha < 2) that is
// below 2 M eps8. Two NVFP4 stages (E4M3 scales, alpha <= 1.125 each) give
// alpha1 * alpha2 * M * eps4^2 = 1.125^2 * M * eps8.

#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <limits>
#include <optional>
#include <stdexcept>

#include "arcquant/blockquant.hpp"

namespace arcquant {

inline constexpr double kArcAlphaSup = 1.125 * 1.125;  // 1.265625

/// Supremum of the MXFP8 worst case: 2 * M * 2^-4.
template <typename Scalar>
Scalar bound_mxfp8(Scalar m) {
  if (m < Scalar(0)) throw std::invalid_argument("bound_mxfp8: negative dynamic range");
  return Scalar(2) * m / Scalar(16);
}

/// Supremum of the dual-stage NVFP4 worst case: 1.125^2 * M * 2^-4.
template <typename Scalar>
Scalar bound_arc(Scalar m) {
  if (m < Scalar(0)) throw std::invalid_argument("bound_arc: negative dynamic range");
  return Scalar(kArcAlphaSup) * m / Scalar(16);
}

struct AlphaStats {
  double min = std::numeric_limits<double>::infinity();
  double mean = 0.0;
  double max = 0.0;
  Index count = 0;

  void add(double alpha) {
    min = std::min(min, alpha);
    max = std::max(max, alpha);
    mean += (alpha - mean) / double(++count);
  }
};

/// Outcome of checking observed errors against their per-block bounds.
struct BoundCheck {
  AlphaStats alpha;         // alpha (single stage) or alpha1 * alpha2 (dual stage)
  Index checked = 0;        // elements checked
  Index violations = 0;     // elements whose error exceeded the bound
  double max_error = 0.0;
  double max_range = 0.0;   // largest block dynamic range seen
  double worst_ratio = 0.0; // max error / bound over elements with a nonzero bound
};

struct ErrorReport {
  double mse = 0.0;
  double max_abs_err = 0.0;
  double frobenius_rel_err = 0.0;
  AlphaStats alpha;
  double bound_mx = 0.0;
  double bound_arc = 0.0;
  Index checked = 0;
  Index violations = 0;

  // Activation reconstruction, split by channel class.
  std::optional<double> act_mse;
  std::optional<double> act_mse_compensated;
  std::optional<double> act_mse_uncompensated;
};

/// MSE, max |error| and ||truth - approx||_F / ||truth||_F (0 when truth is 0).
ErrorReport empirical_report(const Eigen::Ref<const Eigen::MatrixXd>& truth,
                             const Eigen::Ref<const Eigen::MatrixXd>& approx);

/// Same, folding in a bound check: alpha statistics, violation count and the
/// bounds evaluated at the largest block range.
ErrorReport empirical_report(const Eigen::Ref<const Eigen::MatrixXd>& truth,
                             const Eigen::Ref<const Eigen::MatrixXd>& approx, const BoundCheck& check);

/// |x - dq(x)| <= alpha * M_block * eps for every element of `original`,
/// with alpha = effective_scale * q_max / M_block.
BoundCheck check_single_stage(const Eigen::Ref<const Eigen::MatrixXd>& original, const QuantizedTensor& q);

/// |x - dq1(x) - dq2(r)| <= alpha1 * alpha2 * M_block * eps^2 for the first
/// `outliers` columns, where `primary` quantized `original` and `residual`
/// quantized the stage-1 error of those columns.
BoundCheck check_dual_stage(const Eigen::Ref<const Eigen::MatrixXd>& original, const QuantizedTensor& primary,
                            const QuantizedTensor& residual, Index outliers);

/// Mean squared difference over the given column range.
double column_mse(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b,
                  Index begin, Index end);

nlohmann::json to_json(const AlphaStats& stats);
nlohmann::json to_json(const ErrorReport& report);

}  // namespace arcquant
