// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "arcquant/arc_pipeline.hpp"
#include "arcquant/refgemm.hpp"
#include "arcquant/synthetic.hpp"
#include "oracles.hpp"

using namespace arcquant;

namespace {

CalibrationProfile profile_for(const Eigen::MatrixXd& x) {
  const std::vector<Eigen::MatrixXd> batches{x};
  return build_profile(batches, "test");
}

bool same_tensor(const QuantizedTensor& a, const QuantizedTensor& b) {
  return a.format == b.format && a.codes == b.codes && a.block_scales == b.block_scales &&
         a.tensor_scale == b.tensor_scale && a.cols == b.cols && a.layout == b.layout;
}

}  // namespace

TEST_CASE("S = 0 is plain block quantization") {
  const Eigen::MatrixXd x = gen_synthetic(64, 8, 1, 50.0, 1);
  const CalibrationProfile p = with_outlier_count(profile_for(x), 0);
  const AugmentedActivations act = quantize_activation_arc(x, p, FormatSpec::nvfp4());
  CHECK_FALSE(act.reordered);
  CHECK(act.outliers == 0);
  CHECK(same_tensor(act.tensor, quantize_tensor(x, FormatSpec::nvfp4())));

  const Eigen::MatrixXd w = gaussian_matrix(4, 64, 2);
  const AugmentedWeights wt = quantize_weight_arc(w, p, FormatSpec::nvfp4());
  CHECK(same_tensor(wt.tensor, quantize_tensor(w, FormatSpec::nvfp4())));
  CHECK(from_interleaved(to_interleaved(act.tensor)).codes == act.tensor.codes);
  CHECK(to_interleaved(act.tensor).codes == act.tensor.codes);
}

TEST_CASE("stage-1 exact data leaves zero residuals") {
  const double lattice[] = {0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0};
  // Every block peaks at 6 * 448 and every channel shares the same maximum,
  // so the reorder is the identity and each block scale is exactly 448.
  Eigen::MatrixXd x(5, 32);
  for (Index r = 0; r < 4; ++r)
    for (Index c = 0; c < 32; ++c) x(r, c) = 448.0 * lattice[(r + c) % 8] * ((c / 3) % 2 ? -1.0 : 1.0);
  for (Index r = 0; r < 4; ++r) {
    x(r, 0) = 2688.0;
    x(r, 16) = -2688.0;
  }
  for (Index c = 0; c < 32; ++c) x(4, c) = c % 2 ? 2688.0 : -2688.0;
  const CalibrationProfile p = with_outlier_count(profile_for(x), 32);
  const AugmentedActivations act = quantize_activation_arc(x, p, FormatSpec::nvfp4());
  CHECK(*act.tensor.tensor_scale == 1.0);
  CHECK(act.residual.isZero(0.0));
  const QuantizedTensor residual = residual_part(act.tensor);
  CHECK((residual.codes.array() == 0).all());
  CHECK(dequantize(primary_part(act.tensor)) == act.prepared);
}

TEST_CASE("scalar two-stage check") {
  const FormatSpec spec = FormatSpec::nvfp4();
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 16);
  x(0, 0) = 6.0;
  x(0, 1) = 5.0;
  const QuantizedTensor primary = quantize_tensor(x, spec, QuantizeOptions{1.0});
  CHECK(primary.block_scales(0, 0) == 1.0);
  const Eigen::MatrixXd dq1 = dequantize(primary);
  CHECK(dq1(0, 1) == 4.0);

  const Eigen::MatrixXd r = exact_residuals(x, primary, 16);
  CHECK(r(0, 1) == 1.0);
  const QuantizedTensor residual = quantize_tensor(r, spec, QuantizeOptions{primary.tensor_scale});
  const std::vector<double> r_block(r.data(), r.data() + 16);
  const oracle::BlockResult want = oracle::quantize_block(r_block, spec, 1.0);
  CHECK(residual.block_scales(0, 0) == want.scale);
  CHECK(residual.block_scales(0, 0) == 0.171875);
  const Eigen::MatrixXd dq2 = dequantize(residual);
  CHECK(dq2(0, 1) == want.dequantized[1]);

  const double err = std::fabs(5.0 - dq1(0, 1) - dq2(0, 1));
  CHECK(err <= 1.265625 * 6.0 * FormatSpec::mxfp8().epsilon());
  const BoundCheck check = check_dual_stage(x, primary, residual, 16);
  CHECK(check.violations == 0);
  CHECK(check.alpha.max <= 1.265625);
}

TEST_CASE("weight outlier columns are duplicated bit for bit") {
  const Eigen::MatrixXd x = gen_synthetic(80, 6, 3, 40.0, 4);
  const Eigen::MatrixXd w = gaussian_matrix(5, 80, 5);
  const CalibrationProfile p = with_outlier_count(profile_for(x), 20);
  const AugmentedWeights wt = quantize_weight_arc(w, p, FormatSpec::nvfp4());
  CHECK(wt.outliers == 32);
  const Index kp = padded_width(80, 16);
  CHECK(wt.tensor.padded_cols() == kp + 32);
  CHECK(wt.tensor.codes.middleCols(kp, 32) == wt.tensor.codes.leftCols(32));
  CHECK(wt.tensor.block_scales.middleCols(kp / 16, 2) == wt.tensor.block_scales.leftCols(2));
  const Eigen::MatrixXd dq = dequantize_padded(wt.tensor);
  CHECK(dq.middleCols(kp, 32) == dq.leftCols(32));
  CHECK(dequantize_padded(residual_part(wt.tensor)) == dequantize_padded(primary_part(wt.tensor)).leftCols(32));
}

TEST_CASE("augmented widths agree and equal K_in + S") {
  SeededRng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const Index k = 16 * (1 + Index(rng.below(12)));
    const Index s = 16 * Index(rng.below(std::uint64_t(k / 16 + 1)));
    const Eigen::MatrixXd x = gen_synthetic(k, 3, 2, 20.0, rng.bits());
    const Eigen::MatrixXd w = gaussian_matrix(2, k, rng.bits());
    const CalibrationProfile p = with_outlier_count(profile_for(x), s);
    const AugmentedActivations act = quantize_activation_arc(x, p, FormatSpec::nvfp4());
    const AugmentedWeights wt = quantize_weight_arc(w, p, FormatSpec::nvfp4());
    CHECK(act.tensor.padded_cols() == k + s);
    CHECK(wt.tensor.padded_cols() == k + s);
    CHECK(act.tensor.layout == wt.tensor.layout);
  }
  CHECK(augmented_width(0, 100, FormatSpec::nvfp4()) == 0);
  CHECK(augmented_width(3, 100, FormatSpec::nvfp4()) == 16);
  CHECK(augmented_width(3, 100, FormatSpec::mxfp4()) == 32);
  CHECK(augmented_width(100, 100, FormatSpec::nvfp4()) == 112);
}

TEST_CASE("interleaved layout round-trips and places residual blocks") {
  const Eigen::MatrixXd x = gen_synthetic(96, 4, 4, 30.0, 8);
  const CalibrationProfile p = with_outlier_count(profile_for(x), 32);
  const AugmentedActivations act = quantize_activation_arc(x, p, FormatSpec::nvfp4());
  const QuantizedTensor il = to_interleaved(act.tensor);
  CHECK(il.layout.kind == LayoutKind::Interleaved);
  CHECK(same_tensor(from_interleaved(il), act.tensor));

  // [P0 R0 P1 R1 P2 P3 P4 P5]
  const QuantizedTensor& c = act.tensor;
  CHECK(il.codes.middleCols(0, 16) == c.codes.middleCols(0, 16));
  CHECK(il.codes.middleCols(16, 16) == c.codes.middleCols(96, 16));
  CHECK(il.codes.middleCols(32, 16) == c.codes.middleCols(16, 16));
  CHECK(il.codes.middleCols(48, 16) == c.codes.middleCols(112, 16));
  CHECK(il.codes.middleCols(64, 64) == c.codes.middleCols(32, 64));
  for (Index k = 0; k < c.padded_cols(); ++k) CHECK(il.codes.col(physical_column(il, k)) == c.codes.col(k));

  CHECK_THROWS_AS(to_interleaved(il), std::invalid_argument);
  CHECK_THROWS_AS(from_interleaved(c), std::invalid_argument);
  CHECK_THROWS_AS(primary_part(il), std::invalid_argument);
}

TEST_CASE("exact residuals reconstruct the outlier channels") {
  const Eigen::MatrixXd x = gen_synthetic(64, 16, 2, 80.0, 3);
  const CalibrationProfile p = with_outlier_count(profile_for(x), 16);
  const AugmentedActivations act = quantize_activation_arc(x, p, FormatSpec::nvfp4());
  const Eigen::MatrixXd dq1 = dequantize(primary_part(act.tensor));
  const Eigen::MatrixXd r = exact_residuals(act.prepared, primary_part(act.tensor), 16);
  CHECK((dq1.leftCols(16) + r) == act.prepared.leftCols(16));
  CHECK(act.residual == r);
}

TEST_CASE("dual-stage bound on one million compensated elements") {
  const Eigen::MatrixXd x = gaussian_matrix(256, 4096, 13);
  const CalibrationProfile p = with_outlier_count(profile_for(x), 4096);
  const AugmentedActivations act = quantize_activation_arc(x, p, FormatSpec::nvfp4());
  const BoundCheck check =
      check_dual_stage(act.prepared, primary_part(act.tensor), residual_part(act.tensor), act.outliers);
  CHECK(check.checked == 256 * 4096);
  CHECK(check.violations == 0);
  CHECK(check.alpha.max <= 1.265625);
  CHECK(check.alpha.min >= 1.0);
}

TEST_CASE("zero activations give a zero output") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 32);
  const Eigen::MatrixXd w = gaussian_matrix(3, 32, 1);
  const SimulationResult sim = simulate_linear_layer(x, w, profile_for(x), FormatSpec::nvfp4());
  CHECK(sim.y_hat.isZero(0.0));
  CHECK(sim.report.mse == 0.0);
  CHECK(sim.report.violations == 0);
}

TEST_CASE("full compensation stays within the dual-stage bound") {
  const Eigen::MatrixXd x = gen_synthetic(128, 32, 3, 25.0, 21);
  const Eigen::MatrixXd w = gaussian_matrix(16, 128, 22);
  const CalibrationProfile p = with_outlier_count(profile_for(x), 128);
  const SimulationResult sim = simulate_linear_layer(x, w, p, FormatSpec::nvfp4());
  CHECK(sim.report.violations == 0);
  CHECK(sim.report.checked == 2 * 32 * 128);
  CHECK(*sim.report.act_mse_uncompensated == 0.0);
  CHECK(*sim.report.act_mse_compensated == *sim.report.act_mse);
}

TEST_CASE("augmented residuals beat plain RTN on an outlier layer") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Eigen::MatrixXd x = gen_synthetic(256, 32, 1, 100.0, seed);
    const Eigen::MatrixXd w = gaussian_matrix(256, 256, seed + 1000);
    const CalibrationProfile p = profile_for(x);
    CHECK(p.s == 16);
    const SimulationResult arc = simulate_linear_layer(x, w, p, FormatSpec::nvfp4());
    const SimulationResult rtn = simulate_linear_layer(x, w, with_outlier_count(p, 0), FormatSpec::nvfp4());
    CHECK(arc.report.frobenius_rel_err < rtn.report.frobenius_rel_err);
    CHECK(*arc.report.act_mse < *rtn.report.act_mse);
    CHECK(arc.report.violations == 0);
  }
}

TEST_CASE("error metrics do not depend on the layout") {
  const Eigen::MatrixXd x = gen_synthetic(160, 12, 2, 60.0, 31);
  const Eigen::MatrixXd w = gaussian_matrix(8, 160, 32);
  const CalibrationProfile p = with_outlier_count(profile_for(x), 48);
  ArcOptions il;
  il.layout = LayoutKind::Interleaved;
  const SimulationResult a = simulate_linear_layer(x, w, p, FormatSpec::nvfp4());
  const SimulationResult b = simulate_linear_layer(x, w, p, FormatSpec::nvfp4(), il);
  CHECK(b.operands.act.tensor.layout.kind == LayoutKind::Interleaved);
  CHECK(a.y_hat == b.y_hat);
  CHECK(a.report.mse == b.report.mse);
  CHECK(a.report.max_abs_err == b.report.max_abs_err);
  CHECK(a.report.violations == b.report.violations);
  CHECK(*a.report.act_mse == *b.report.act_mse);
}

TEST_CASE("RMSNorm is folded into the activation path") {
  const Eigen::MatrixXd x = gen_synthetic(64, 8, 1, 30.0, 40);
  const Eigen::MatrixXd w = gaussian_matrix(4, 64, 41);
  Eigen::VectorXd gamma(64);
  for (Index i = 0; i < 64; ++i) gamma(i) = 0.5 + 0.01 * double(i);
  ArcOptions opt;
  opt.rmsnorm_weight = gamma;
  const CalibrationProfile p = profile_for(x);
  const SimulationResult sim = simulate_linear_layer(x, w, p, FormatSpec::nvfp4(), opt);
  const Eigen::MatrixXd ref = rmsnorm_rows(x, gamma, 1e-6) * w.transpose();
  CHECK(sim.y_exact.isApprox(ref, 1e-14));
  CHECK(apply_reorder(rmsnorm_rows(x, gamma, 1e-6), p).isApprox(sim.operands.act.prepared, 1e-14));
  CHECK(sim.report.frobenius_rel_err < 0.2);
}

TEST_CASE("profile and tensor must agree") {
  const Eigen::MatrixXd x = gaussian_matrix(2, 32, 1);
  const CalibrationProfile p = profile_for(gaussian_matrix(2, 48, 1));
  CHECK_THROWS_AS(quantize_activation_arc(x, p, FormatSpec::nvfp4()), std::invalid_argument);
  CHECK_THROWS_AS(quantize_weight_arc(x, p, FormatSpec::nvfp4()), std::invalid_argument);
  CHECK_THROWS_AS(simulate_linear_layer(x, gaussian_matrix(2, 16, 1), profile_for(x), FormatSpec::nvfp4()),
                  std::invalid_argument);
}
