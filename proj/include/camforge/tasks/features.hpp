// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "camforge/image.hpp"

namespace camforge {

using Descriptor = std::array<std::uint64_t, 4>;  // 256 bits

struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double response = 0.0;
  double angle_rad = 0.0;
};

struct FeatureSet {
  std::vector<Keypoint> keypoints;
  std::vector<Descriptor> descriptors;  // parallel to keypoints

  std::size_t size() const noexcept { return keypoints.size(); }
  bool empty() const noexcept { return keypoints.empty(); }
};

struct CornerOptions {
  int max_n = 2000;
  double harris_k = 0.04;
  /// Keep responses above max(abs_threshold, rel_threshold * strongest).
  double rel_threshold = 0.01;
  double abs_threshold = 1e-10;
};

/// Pixels kept clear of the image edge so every descriptor sample and the
/// orientation disc stay inside.
inline constexpr int kFeatureBorder = 14;
inline constexpr int kMinFeatureImageSize = 32;

/// Harris corners with 3x3 non-maximum suppression, the strongest max_n
/// kept, each with an intensity-centroid orientation and a steered 256-bit
/// binary descriptor. Throws PreconditionError below
/// kMinFeatureImageSize in either dimension.
FeatureSet detect_corners(const ImageF& image, const CornerOptions& options = {});
FeatureSet detect_corners(const ImageF& image, int max_n);

int hamming(const Descriptor& a, const Descriptor& b) noexcept;

struct Correspondence {
  std::array<double, 2> a;
  std::array<double, 2> b;
};

/// Mutual nearest neighbours in Hamming distance that also pass the ratio
/// test best < ratio * second_best (in each direction's own list).
std::vector<Correspondence> match_features(const FeatureSet& f1, const FeatureSet& f2, double ratio = 0.8);

struct MatchResult {
  int n_inlier = 0;
  int n_total = 0;
  double inlier_ratio() const noexcept { return n_total > 0 ? static_cast<double>(n_inlier) / n_total : 0.0; }
};

struct RansacOptions {
  int iterations = 500;
  double inlier_px = 2.0;
  std::uint64_t seed = 0;
};

using Homography = std::array<double, 9>;  // row-major, h[8] normalized to 1 when possible

/// Normalized four-point DLT. Returns false for degenerate configurations.
bool homography_from_4(std::span<const Correspondence, 4> pts, Homography& out);

std::array<double, 2> apply_homography(const Homography& h, std::array<double, 2> p);

/// Largest consensus set over `iterations` random minimal samples. Each
/// sample is drawn independently of the threshold, so the count never grows
/// when inlier_px shrinks. Fewer than 4 correspondences give 0.
int ransac_inliers(std::span<const Correspondence> matches, const RansacOptions& options);

/// n_total counts candidate matches after the mutual and ratio filters.
MatchResult match_and_ransac(const FeatureSet& f1, const FeatureSet& f2, const RansacOptions& options = {},
                             double ratio = 0.8);

/// Debug overlay: grey image with keypoints marked as red crosses.
void write_feature_overlay(const std::filesystem::path& path, const ImageF& image, const FeatureSet& features);

}  // namespace camforge
