// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "arcquant/calibration.hpp"
#include "arcquant/synthetic.hpp"

using namespace arcquant;

namespace {

Eigen::MatrixXd from_channel_max(const std::vector<double>& maxima) {
  Eigen::MatrixXd x(2, Index(maxima.size()));
  for (Index j = 0; j < x.cols(); ++j) {
    x(0, j) = maxima[std::size_t(j)] * (j % 2 ? -1.0 : 1.0);
    x(1, j) = 0.25 * maxima[std::size_t(j)];
  }
  return x;
}

}  // namespace

TEST_CASE("threshold rule on hand-checked maxima") {
  const std::vector<Eigen::MatrixXd> batches{from_channel_max({10, 2, 1.4, 0.5})};
  const CalibrationProfile p = build_profile(batches, "q_proj");
  CHECK(p.layer == "q_proj");
  CHECK(p.m == 10.0);
  CHECK(p.tau == 1.25);
  CHECK(p.s_raw == 3);
  CHECK(p.s == 4);  // rounded up to 16, capped at K_in
  CHECK(p.reorder == std::vector<Index>{0, 1, 2, 3});
}

TEST_CASE("channel exactly at the threshold is not an outlier") {
  const CalibrationProfile p = profile_from_channel_max({0.5, 8.0, 1.0, 1.0000001}, "l");
  CHECK(p.tau == 1.0);
  CHECK(p.s_raw == 2);
  CHECK(p.reorder == std::vector<Index>{1, 3, 2, 0});
}

TEST_CASE("uniform and zero activations") {
  const CalibrationProfile uniform = profile_from_channel_max(std::vector<double>(40, 3.0), "u");
  CHECK(uniform.s_raw == 40);
  CHECK(uniform.s == 40);

  const std::vector<Eigen::MatrixXd> zeros{Eigen::MatrixXd::Zero(4, 24)};
  const CalibrationProfile z = build_profile(zeros, "z");
  CHECK(z.m == 0.0);
  CHECK(z.tau == 0.0);
  CHECK(z.s_raw == 0);
  CHECK(z.s == 0);
}

TEST_CASE("outlier count rounds up to sixteen") {
  std::vector<double> maxima(100, 1.0);
  for (int j = 0; j < 17; ++j) maxima[std::size_t(j * 5)] = 50.0;
  const CalibrationProfile p = profile_from_channel_max(maxima, "l");
  CHECK(p.s_raw == 17);
  CHECK(p.s == 32);
}

TEST_CASE("ties keep the lower channel first") {
  const CalibrationProfile p = profile_from_channel_max({1, 5, 5, 2, 5}, "l");
  CHECK(p.reorder == std::vector<Index>{1, 2, 4, 3, 0});
}

TEST_CASE("threshold semantics and sorted order on random maxima") {
  SeededRng rng(44);
  for (int trial = 0; trial < 200; ++trial) {
    const Index k = 1 + Index(rng.below(300));
    std::vector<double> maxima(static_cast<std::size_t>(k));
    for (auto& v : maxima) v = rng.below(10) == 0 ? 20.0 * rng.uniform() : rng.uniform();
    const CalibrationProfile p = profile_from_channel_max(maxima, "l");
    CHECK(p.tau == p.m / 8.0);
    for (Index j = 0; j < k; ++j) {
      const double v = maxima[std::size_t(p.reorder[std::size_t(j)])];
      CHECK((j < p.s_raw) == (v > p.tau));
      if (j > 0) CHECK(maxima[std::size_t(p.reorder[std::size_t(j - 1)])] >= v);
    }
    CHECK(p.s == std::min(padded_width(p.s_raw, 16), k));
  }
}

TEST_CASE("reorder permutes columns by descending maximum") {
  const Eigen::MatrixXd x = gen_synthetic(64, 16, 3, 30.0, 2);
  const std::vector<Eigen::MatrixXd> batches{x};
  const CalibrationProfile p = build_profile(batches, "l");
  const Eigen::MatrixXd r = apply_reorder(x, p);
  const Eigen::RowVectorXd col_max = r.cwiseAbs().colwise().maxCoeff();
  for (Index j = 1; j < col_max.size(); ++j) CHECK(col_max(j - 1) >= col_max(j));
  CHECK(inverse_reorder(r, p) == x);
  CHECK(apply_reorder(inverse_reorder(x, p), p) == x);

  CalibrationProfile identity = profile_from_channel_max(std::vector<double>(64, 1.0), "id");
  CHECK(apply_reorder(x, identity) == x);

  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(64, 0, 63);
  const Eigen::VectorXd rv = reorder_channels(v, p);
  for (Index j = 0; j < 64; ++j) CHECK(rv(j) == double(p.reorder[std::size_t(j)]));
  CHECK_THROWS_AS(apply_reorder(Eigen::MatrixXd::Zero(2, 5), p), std::invalid_argument);
}

TEST_CASE("more data never lowers a channel maximum") {
  std::vector<Eigen::MatrixXd> batches;
  std::vector<double> prev_max;
  for (int i = 0; i < 10; ++i) {
    batches.push_back(gen_synthetic(96, 8, 2, 5.0 + i, 100 + i));
    const CalibrationProfile p = build_profile(batches, "l");
    for (std::size_t j = 0; j < prev_max.size(); ++j) CHECK(p.channel_max[j] >= prev_max[j]);
    prev_max = p.channel_max;
  }
}

TEST_CASE("S_raw is non-decreasing while M is fixed") {
  std::vector<double> maxima{16.0, 1.0, 1.0, 1.0, 1.0};
  Index prev = profile_from_channel_max(maxima, "l").s_raw;
  for (std::size_t j = 1; j < maxima.size(); ++j) {
    maxima[j] = 3.0;
    const Index now = profile_from_channel_max(maxima, "l").s_raw;
    CHECK(now >= prev);
    prev = now;
  }
  CHECK(prev == 5);
}

TEST_CASE("identical inputs give identical profiles") {
  const std::vector<Eigen::MatrixXd> a{gen_synthetic(48, 10, 2, 20.0, 9), gen_synthetic(48, 10, 1, 9.0, 10)};
  const std::vector<Eigen::MatrixXd> b{gen_synthetic(48, 10, 2, 20.0, 9), gen_synthetic(48, 10, 1, 9.0, 10)};
  const CalibrationProfile pa = build_profile(a, "l");
  CHECK(pa == build_profile(b, "l"));
  CHECK(to_json(pa).dump() == to_json(build_profile(b, "l")).dump());
}

TEST_CASE("invalid calibration input") {
  CHECK_THROWS_AS(build_profile(std::vector<Eigen::MatrixXd>{}, "l"), std::invalid_argument);
  const std::vector<Eigen::MatrixXd> mixed{Eigen::MatrixXd::Ones(2, 4), Eigen::MatrixXd::Ones(2, 5)};
  CHECK_THROWS_AS(build_profile(mixed, "l"), std::invalid_argument);
  CHECK_THROWS_AS(profile_from_channel_max({1.0, -2.0}, "l"), std::invalid_argument);
  CHECK_THROWS_AS(with_outlier_count(profile_from_channel_max({1, 2}, "l"), 3), std::invalid_argument);
  CHECK(with_outlier_count(profile_from_channel_max({1, 2}, "l"), 1).s == 1);
}

TEST_CASE("profile JSON round-trip") {
  const std::vector<Eigen::MatrixXd> batches{gen_synthetic(80, 12, 3, 17.3, 5)};
  const CalibrationProfile p = build_profile(batches, "model.layers.3.mlp.down_proj");
  CHECK(profile_from_json(to_json(p)) == p);

  const auto path = std::filesystem::temp_directory_path() / "arcquant_profile_test.json";
  save_profile(path, p);
  CHECK(load_profile(path) == p);
  std::filesystem::remove(path);

  nlohmann::json bad = to_json(p);
  bad["reorder"][0] = bad["reorder"][1];
  CHECK_THROWS_AS(profile_from_json(bad), std::invalid_argument);
  CHECK_THROWS(load_profile("/nonexistent/profile.json"));
}
