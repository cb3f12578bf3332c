// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0

#include "arcquant/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace arcquant {

CalibrationProfile profile_from_channel_max(std::vector<double> channel_max, std::string layer) {
  if (channel_max.empty()) throw std::invalid_argument("calibration: no channels");
  for (double v : channel_max)
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("calibration: invalid channel maximum");

  CalibrationProfile p;
  p.layer = std::move(layer);
  p.channel_max = std::move(channel_max);
  const Index k = static_cast<Index>(p.channel_max.size());

  p.reorder.resize(static_cast<std::size_t>(k));
  std::iota(p.reorder.begin(), p.reorder.end(), Index{0});
  std::stable_sort(p.reorder.begin(), p.reorder.end(), [&](Index a, Index b) {
    return p.channel_max[static_cast<std::size_t>(a)] > p.channel_max[static_cast<std::size_t>(b)];
  });

  p.m = *std::max_element(p.channel_max.begin(), p.channel_max.end());
  p.tau = std::ldexp(p.m, -3);
  p.s_raw = std::count_if(p.channel_max.begin(), p.channel_max.end(), [&](double v) { return v > p.tau; });
  p.s = std::min(padded_width(p.s_raw, kOutlierAlignment), k);
  return p;
}

CalibrationProfile build_profile(std::span<const Eigen::MatrixXd> batches, std::string layer) {
  if (batches.empty()) throw std::invalid_argument("calibration: no batches");
  const Index k = batches.front().cols();
  if (k == 0) throw std::invalid_argument("calibration: zero channels");
  std::vector<double> channel_max(static_cast<std::size_t>(k), 0.0);
  for (const auto& batch : batches) {
    if (batch.cols() != k) throw std::invalid_argument("calibration: inconsistent channel count");
    if (!batch.allFinite()) throw std::invalid_argument("calibration: non-finite activations");
    if (batch.rows() == 0) continue;
    const Eigen::RowVectorXd col_max = batch.cwiseAbs().colwise().maxCoeff();
    for (Index j = 0; j < k; ++j)
      channel_max[static_cast<std::size_t>(j)] = std::max(channel_max[static_cast<std::size_t>(j)], col_max(j));
  }
  return profile_from_channel_max(std::move(channel_max), std::move(layer));
}

CalibrationProfile with_outlier_count(CalibrationProfile profile, Index s) {
  if (s < 0 || s > profile.k_in()) throw std::invalid_argument("outlier count must lie in [0, K_in]");
  profile.s = s;
  return profile;
}

Eigen::MatrixXd apply_reorder(const Eigen::Ref<const Eigen::MatrixXd>& x, const CalibrationProfile& profile) {
  if (x.cols() != profile.k_in()) throw std::invalid_argument("apply_reorder: channel count mismatch");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) out.col(j) = x.col(profile.reorder[static_cast<std::size_t>(j)]);
  return out;
}

Eigen::MatrixXd inverse_reorder(const Eigen::Ref<const Eigen::MatrixXd>& x, const CalibrationProfile& profile) {
  if (x.cols() != profile.k_in()) throw std::invalid_argument("inverse_reorder: channel count mismatch");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Index j = 0; j < x.cols(); ++j) out.col(profile.reorder[static_cast<std::size_t>(j)]) = x.col(j);
  return out;
}

Eigen::VectorXd reorder_channels(const Eigen::Ref<const Eigen::VectorXd>& v, const CalibrationProfile& profile) {
  if (v.size() != profile.k_in()) throw std::invalid_argument("reorder_channels: length mismatch");
  Eigen::VectorXd out(v.size());
  for (Index j = 0; j < v.size(); ++j) out(j) = v(profile.reorder[static_cast<std::size_t>(j)]);
  return out;
}

nlohmann::json to_json(const CalibrationProfile& profile) {
  return nlohmann::json{{"layer", profile.layer}, {"reorder", profile.reorder}, {"channel_max", profile.channel_max},
                        {"m", profile.m},         {"tau", profile.tau},         {"s_raw", profile.s_raw},
                        {"s", profile.s}};
}

CalibrationProfile profile_from_json(const nlohmann::json& doc) {
  CalibrationProfile p;
  p.layer = doc.at("layer").get<std::string>();
  p.reorder = doc.at("reorder").get<std::vector<Index>>();
  p.channel_max = doc.at("channel_max").get<std::vector<double>>();
  p.m = doc.at("m").get<double>();
  p.tau = doc.at("tau").get<double>();
  p.s_raw = doc.at("s_raw").get<Index>();
  p.s = doc.at("s").get<Index>();

  const Index k = p.k_in();
  if (static_cast<Index>(p.channel_max.size()) != k) throw std::invalid_argument("profile: reorder/channel_max length mismatch");
  std::vector<bool> seen(static_cast<std::size_t>(k), false);
  for (Index j : p.reorder) {
    if (j < 0 || j >= k || seen[static_cast<std::size_t>(j)]) throw std::invalid_argument("profile: reorder is not a permutation");
    seen[static_cast<std::size_t>(j)] = true;
  }
  if (p.s_raw < 0 || p.s < 0 || p.s > k) throw std::invalid_argument("profile: outlier count out of range");
  return p;
}

void save_profile(const std::filesystem::path& path, const CalibrationProfile& profile) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write profile " + path.string());
  out << to_json(profile).dump(2) << '\n';
}

CalibrationProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read profile " + path.string());
  return profile_from_json(nlohmann::json::parse(in));
}

}  // namespace arcquant
