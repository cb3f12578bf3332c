// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include "arcquant/verify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "arcquant/analysis.hpp"
#include "arcquant/arc_pipeline.hpp"
#include "arcquant/blockquant.hpp"
#include "arcquant/calibration.hpp"
#include "arcquant/refgemm.hpp"
#include "arcquant/synthetic.hpp"

namespace arcquant {
namespace {

constexpr Index kChunkRows = 64;
constexpr Index kChunkCols = 256;

std::string describe(const AlphaStats& a, double worst_ratio) {
  std::ostringstream os;
  os << std::setprecision(9) << "alpha min " << a.min << " max " << a.max << ", worst error/bound " << worst_ratio;
  return os.str();
}

// Gaussian chunk whose blocks carry independent magnitudes 2^u, u in [-spread, spread].
Eigen::MatrixXd block_scaled_chunk(SeededRng& rng, Index block_size, double spread) {
  Eigen::MatrixXd x(kChunkRows, kChunkCols);
  for (Index r = 0; r < kChunkRows; ++r) {
    for (Index b = 0; b < kChunkCols / block_size; ++b) {
      const double mag = std::exp2(spread * (2.0 * rng.uniform() - 1.0));
      for (Index c = b * block_size; c < (b + 1) * block_size; ++c) x(r, c) = mag * rng.normal();
    }
  }
  return x;
}

// Zeroes the code of the largest element in the first block of row 0.
void corrupt_first_block(QuantizedTensor& q, const Eigen::Ref<const Eigen::MatrixXd>& original) {
  Index col = 0;
  original.row(0).head(q.format.block_size).cwiseAbs().maxCoeff(&col);
  q.codes(0, col) = 0;
}

// Zeroes the code of the largest element in every block of row 0.
void corrupt_row_blocks(QuantizedTensor& q, const Eigen::Ref<const Eigen::MatrixXd>& original) {
  const Index g = q.format.block_size;
  for (Index b = 0; b < original.cols() / g; ++b) {
    Index col = 0;
    original.row(0).segment(b * g, g).cwiseAbs().maxCoeff(&col);
    q.codes(0, b * g + col) = 0;
  }
}

void merge(BoundCheck& total, const BoundCheck& part) {
  total.checked += part.checked;
  total.violations += part.violations;
  total.max_error = std::max(total.max_error, part.max_error);
  total.max_range = std::max(total.max_range, part.max_range);
  total.worst_ratio = std::max(total.worst_ratio, part.worst_ratio);
  if (part.alpha.count > 0) {
    const double n = double(total.alpha.count + part.alpha.count);
    total.alpha.mean = (total.alpha.mean * double(total.alpha.count) + part.alpha.mean * double(part.alpha.count)) / n;
    total.alpha.count += part.alpha.count;
    total.alpha.min = std::min(total.alpha.min, part.alpha.min);
    total.alpha.max = std::max(total.alpha.max, part.alpha.max);
  }
}

SuiteCheck scale_alpha_check(const SuiteOptions& opt, const std::string& name, std::uint64_t salt, double lo_exp, double hi_exp,
                             double (*alpha_of)(double), double upper, bool upper_inclusive) {
  SeededRng rng(opt.seed * 0x100 + salt);
  SuiteCheck out{name, 0, 0, {}};
  AlphaStats stats;
  for (Index i = 0; i < opt.samples; ++i) {
    const double raw = std::exp2(lo_exp + (hi_exp - lo_exp) * rng.uniform());
    double alpha = alpha_of(raw);
    if (opt.inject_fault) alpha *= 2.0;
    stats.add(alpha);
    ++out.checked;
    const bool above = upper_inclusive ? alpha > upper : alpha >= upper;
    if (alpha < 1.0 || above) ++out.violations;
  }
  std::ostringstream os;
  os << std::setprecision(9) << "alpha in [" << stats.min << ", " << stats.max << "]";
  out.detail = os.str();
  return out;
}

SuiteCheck mxfp8_check(const SuiteOptions& opt) {
  const FormatSpec spec = FormatSpec::mxfp8();
  SeededRng rng(opt.seed + 1);
  BoundCheck total;
  for (Index done = 0; done < opt.samples; done += kChunkRows * kChunkCols) {
    const Eigen::MatrixXd x = block_scaled_chunk(rng, spec.block_size, 8.0);
    QuantizedTensor q = quantize_tensor(x, spec);
    if (opt.inject_fault) corrupt_first_block(q, x);
    merge(total, check_single_stage(x, q));
  }
  SuiteCheck out{"mxfp8_single_stage", total.checked, total.violations, describe(total.alpha, total.worst_ratio)};
  if (!(total.alpha.max < 2.0)) ++out.violations;
  return out;
}

SuiteCheck nvfp4_dual_check(const SuiteOptions& opt) {
  const FormatSpec spec = FormatSpec::nvfp4();
  SeededRng rng(opt.seed + 2);
  BoundCheck total;
  for (Index done = 0; done < opt.samples; done += kChunkRows * kChunkCols) {
    const Eigen::MatrixXd x = block_scaled_chunk(rng, spec.block_size, 2.0);
    const QuantizedTensor primary = quantize_tensor(x, spec);
    const Eigen::MatrixXd r = exact_residuals(x, primary, primary.padded_cols());
    QuantizedTensor residual = quantize_tensor(r, spec, QuantizeOptions{primary.tensor_scale});
    if (opt.inject_fault) corrupt_row_blocks(residual, r);
    merge(total, check_dual_stage(x, primary, residual, primary.padded_cols()));
  }
  SuiteCheck out{"nvfp4_dual_stage", total.checked, total.violations, describe(total.alpha, total.worst_ratio)};
  if (total.alpha.max > kArcAlphaSup) ++out.violations;
  return out;
}

struct GemmConfig {
  FormatSpec spec;
  Index n, k, m, s;
};

GemmConfig random_config(SeededRng& rng) {
  GemmConfig c;
  c.spec = rng.below(2) == 0 ? FormatSpec::nvfp4() : FormatSpec::mxfp4();
  c.n = 1 + Index(rng.below(6));
  c.k = 1 + Index(rng.below(160));
  c.m = 1 + Index(rng.below(6));
  c.s = Index(rng.below(std::uint64_t(c.k + 1)));
  return c;
}

Index count_mismatches(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Index bad = 0;
  for (Index i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a(i)) != std::bit_cast<std::uint64_t>(b(i))) ++bad;
  return bad;
}

void corrupt_first_nonzero(QuantizedTensor& q) {
  for (Index i = 0; i < q.codes.size(); ++i) {
    if (q.codes(i) != 0) {
      q.codes(i) = 0;
      return;
    }
  }
}

std::vector<SuiteCheck> gemm_checks(const SuiteOptions& opt) {
  SeededRng rng(opt.seed + 3);
  SuiteCheck fused{"fused_gemm_equivalence", 0, 0, {}};
  SuiteCheck layout{"layout_invariance", 0, 0, {}};
  for (Index i = 0; i < opt.gemm_configs; ++i) {
    const GemmConfig c = random_config(rng);
    const std::uint64_t data_seed = rng.bits();
    const Eigen::MatrixXd x = gen_synthetic(c.k, c.n, std::min<Index>(2, c.k), 40.0, data_seed);
    const Eigen::MatrixXd w = gaussian_matrix(c.m, c.k, data_seed + 1);
    const std::vector<Eigen::MatrixXd> batches{x};
    const CalibrationProfile profile = with_outlier_count(build_profile(batches, "verify"), c.s);

    AugmentedOperands ops{quantize_activation_arc(x, profile, c.spec), quantize_weight_arc(w, profile, c.spec)};
    const Eigen::MatrixXd split =
        ops.act.outliers > 0
            ? gemm_two_term(primary_part(ops.act.tensor), primary_part(ops.wt.tensor), residual_part(ops.act.tensor),
                            residual_part(ops.wt.tensor))
            : gemm_two_term(ops.act.tensor, ops.wt.tensor);

    AugmentedOperands interleaved = to_interleaved(ops);
    if (opt.inject_fault) {
      corrupt_first_nonzero(ops.act.tensor);
      corrupt_first_nonzero(interleaved.act.tensor);
    }
    const Eigen::MatrixXd y = gemm_dequant(ops.act.tensor, ops.wt.tensor);
    const Eigen::MatrixXd y_int = gemm_dequant(interleaved.act.tensor, interleaved.wt.tensor, ReductionOrder::Logical);

    fused.checked += y.size();
    fused.violations += count_mismatches(y, split);
    layout.checked += y.size();
    layout.violations += count_mismatches(opt.inject_fault ? split : y, y_int);
  }
  fused.detail = std::to_string(opt.gemm_configs) + " random shapes, bitwise comparison";
  layout.detail = fused.detail;
  return {fused, layout};
}

}  // namespace

double e8m0_alpha(double raw_scale) {
  return decode(encode_scale_e8m0_up(raw_scale)) / raw_scale;
}

double e4m3_alpha(double raw_scale) {
  return decode(encode_scale_e4m3_up(raw_scale)) / raw_scale;
}

std::vector<SuiteCheck> run_bound_suite(const SuiteOptions& options) {
  if (options.samples < 1) throw std::invalid_argument("run_bound_suite: samples must be at least 1");
  std::vector<SuiteCheck> out;
  out.push_back(scale_alpha_check(options, "e8m0_alpha", 4, -100.0, 100.0, &e8m0_alpha, 2.0, false));
  // Normal E4M3 range [2^-6, 448].
  out.push_back(scale_alpha_check(options, "e4m3_alpha", 5, -6.0, std::log2(448.0), &e4m3_alpha, 1.125, true));
  out.push_back(mxfp8_check(options));
  out.push_back(nvfp4_dual_check(options));
  for (auto& c : gemm_checks(options)) out.push_back(std::move(c));
  return out;
}

nlohmann::json to_json(const SuiteCheck& check) {
  return nlohmann::json{{"name", check.name},
                        {"checked", check.checked},
                        {"violations", check.violations},
                        {"passed", check.passed()},
                        {"detail", check.detail}};
}

}  // namespace arcquant
