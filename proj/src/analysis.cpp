// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include "arcquant/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace arcquant {

ErrorReport empirical_report(const Eigen::Ref<const Eigen::MatrixXd>& truth,
                             const Eigen::Ref<const Eigen::MatrixXd>& approx) {
  if (truth.rows() != approx.rows() || truth.cols() != approx.cols())
    throw std::invalid_argument("empirical_report: shape mismatch");
  ErrorReport r;
  if (truth.size() == 0) return r;
  const Eigen::MatrixXd diff = truth - approx;
  r.mse = diff.squaredNorm() / double(diff.size());
  r.max_abs_err = diff.cwiseAbs().maxCoeff();
  const double norm = truth.norm();
  r.frobenius_rel_err = norm > 0.0 ? diff.norm() / norm : 0.0;
  return r;
}

ErrorReport empirical_report(const Eigen::Ref<const Eigen::MatrixXd>& truth,
                             const Eigen::Ref<const Eigen::MatrixXd>& approx, const BoundCheck& check) {
  ErrorReport r = empirical_report(truth, approx);
  r.alpha = check.alpha;
  r.checked = check.checked;
  r.violations = check.violations;
  r.bound_mx = bound_mxfp8(check.max_range);
  r.bound_arc = bound_arc(check.max_range);
  return r;
}

BoundCheck check_single_stage(const Eigen::Ref<const Eigen::MatrixXd>& original, const QuantizedTensor& q) {
  if (original.rows() != q.rows() || original.cols() > q.padded_cols())
    throw std::invalid_argument("check_single_stage: shape mismatch");
  const Index g = q.format.block_size;
  const double eps = q.format.epsilon();
  const Eigen::MatrixXd dq = dequantize_padded(q);
  const Eigen::MatrixXd ranges = block_maxima(original, g);

  BoundCheck out;
  for (Index r = 0; r < original.rows(); ++r) {
    for (Index b = 0; b < ranges.cols(); ++b) {
      const double m = ranges(r, b);
      out.max_range = std::max(out.max_range, m);
      const Index end = std::min((b + 1) * g, original.cols());
      if (m == 0.0) {
        for (Index c = b * g; c < end; ++c) {
          ++out.checked;
          if (dq(r, c) != 0.0) ++out.violations;
        }
        continue;
      }
      const double alpha = q.effective_scale(r, b) * q.format.q_max() / m;
      out.alpha.add(alpha);
      const double bound = alpha * m * eps;
      for (Index c = b * g; c < end; ++c) {
        const double err = std::fabs(original(r, c) - dq(r, c));
        ++out.checked;
        out.max_error = std::max(out.max_error, err);
        out.worst_ratio = std::max(out.worst_ratio, err / bound);
        if (err > bound) ++out.violations;
      }
    }
  }
  return out;
}

BoundCheck check_dual_stage(const Eigen::Ref<const Eigen::MatrixXd>& original, const QuantizedTensor& primary,
                            const QuantizedTensor& residual, Index outliers) {
  const Index g = primary.format.block_size;
  if (outliers % g != 0) throw std::invalid_argument("check_dual_stage: outlier region must be block aligned");
  if (original.rows() != primary.rows() || original.rows() != residual.rows() ||
      residual.padded_cols() < outliers || outliers > primary.padded_cols())
    throw std::invalid_argument("check_dual_stage: shape mismatch");
  // Columns past the data are zero padding of the last block.
  const Index region = std::min(outliers, original.cols());

  const double eps = primary.format.epsilon();
  const double eps2 = eps * eps;
  const double q_max = primary.format.q_max();
  const Eigen::MatrixXd dq1 = dequantize_padded(primary);
  const Eigen::MatrixXd dq2 = dequantize_padded(residual);
  const Eigen::MatrixXd ranges = block_maxima(original.leftCols(region), g);
  const Eigen::MatrixXd r_true = original.leftCols(region) - dq1.leftCols(region);
  const Eigen::MatrixXd residual_ranges = block_maxima(r_true, g);

  BoundCheck out;
  for (Index r = 0; r < original.rows(); ++r) {
    for (Index b = 0; b < ranges.cols(); ++b) {
      const double m = ranges(r, b);
      const double mr = residual_ranges(r, b);
      out.max_range = std::max(out.max_range, m);
      const Index end = std::min((b + 1) * g, region);
      const double alpha1 = m > 0.0 ? primary.effective_scale(r, b) * q_max / m : 1.0;
      const double alpha2 = mr > 0.0 ? residual.effective_scale(r, b) * q_max / mr : 1.0;
      if (m > 0.0 && mr > 0.0) out.alpha.add(alpha1 * alpha2);
      const double bound = alpha1 * alpha2 * m * eps2;
      for (Index c = b * g; c < end; ++c) {
        const double err = std::fabs(original(r, c) - dq1(r, c) - dq2(r, c));
        ++out.checked;
        out.max_error = std::max(out.max_error, err);
        if (bound > 0.0) out.worst_ratio = std::max(out.worst_ratio, err / bound);
        if (err > bound) ++out.violations;
      }
    }
  }
  return out;
}

double column_mse(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b, Index begin,
                  Index end) {
  if (end <= begin || a.rows() == 0) return 0.0;
  const auto diff = a.middleCols(begin, end - begin) - b.middleCols(begin, end - begin);
  return diff.squaredNorm() / double(a.rows() * (end - begin));
}

nlohmann::json to_json(const AlphaStats& stats) {
  if (stats.count == 0) return nlohmann::json{{"count", 0}};
  return nlohmann::json{{"min", stats.min}, {"mean", stats.mean}, {"max", stats.max}, {"count", stats.count}};
}

nlohmann::json to_json(const ErrorReport& report) {
  nlohmann::json j{{"mse", report.mse},
                   {"max_abs_err", report.max_abs_err},
                   {"frobenius_rel_err", report.frobenius_rel_err},
                   {"alpha", to_json(report.alpha)},
                   {"bound_mx", report.bound_mx},
                   {"bound_arc", report.bound_arc},
                   {"checked", report.checked},
                   {"violations", report.violations}};
  if (report.act_mse) j["act_mse"] = *report.act_mse;
  if (report.act_mse_compensated) j["act_mse_compensated"] = *report.act_mse_compensated;
  if (report.act_mse_uncompensated) j["act_mse_uncompensated"] = *report.act_mse_uncompensated;
  return j;
}

}  // namespace arcquant
