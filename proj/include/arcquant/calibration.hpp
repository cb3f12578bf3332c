// Copyright (c) 2026, The arcquant Authors
// SPDX-License-Identifier: Apache-2.0
//
// Offline outlier identification. Channels are ranked by their absolute
// maximum over the calibration data; with M the layer-wise maximum, every
// channel whose maximum is strictly above tau = M / 8 gets a residual channel.

#pragma once

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "arcquant/blockquant.hpp"

namespace arcquant {

/// Outlier counts are rounded up to this many channels.
inline constexpr Index kOutlierAlignment = 16;

struct CalibrationProfile {
  std::string layer;
  std::vector<Index> reorder;        // reordered position -> original channel
  std::vector<double> channel_max;   // per original channel
  double m = 0.0;
  double tau = 0.0;
  Index s_raw = 0;
  Index s = 0;

  Index k_in() const { return static_cast<Index>(reorder.size()); }

  friend bool operator==(const CalibrationProfile&, const CalibrationProfile&) = default;
};

/// Builds a profile from per-channel maxima directly.
CalibrationProfile profile_from_channel_max(std::vector<double> channel_max, std::string layer);

/// Aggregates channel maxima over all batches (columns are channels).
/// Throws std::invalid_argument on no batches or inconsistent widths.
CalibrationProfile build_profile(std::span<const Eigen::MatrixXd> batches, std::string layer);

/// Copy of `profile` with S replaced; requires 0 <= s <= K_in.
CalibrationProfile with_outlier_count(CalibrationProfile profile, Index s);

/// Column permutation: out.col(j) = x.col(reorder[j]).
Eigen::MatrixXd apply_reorder(const Eigen::Ref<const Eigen::MatrixXd>& x, const CalibrationProfile& profile);
Eigen::MatrixXd inverse_reorder(const Eigen::Ref<const Eigen::MatrixXd>& x, const CalibrationProfile& profile);

/// Same permutation applied to a vector (e.g. an RMSNorm weight).
Eigen::VectorXd reorder_channels(const Eigen::Ref<const Eigen::VectorXd>& v, const CalibrationProfile& profile);

/// JSON document {layer, reorder, channel_max, m, tau, s_raw, s}.
nlohmann::json to_json(const CalibrationProfile& profile);
CalibrationProfile profile_from_json(const nlohmann::json& doc);

void save_profile(const std::filesystem::path& path, const CalibrationProfile& profile);
CalibrationProfile load_profile(const std::filesystem::path& path);

}  // namespace arcquant
