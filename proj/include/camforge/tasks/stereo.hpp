// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "camforge/image.hpp"

namespace camforge {

using Mask = Image<std::uint8_t>;

struct DisparityMap {
  ImageF disparity;  // pixels, in [0, d_max]
  Mask valid;        // 1 where the matcher is confident
};

struct BlockMatchOptions {
  int d_max = 192;
  int window = 5;  // odd, >= 3
  /// A pixel is rejected when the runner-up cost (|d - d_best| > 1) is within
  /// this fraction of the best cost.
  double uniqueness = 0.05;
  bool left_right_check = true;
};

/// Sum-of-absolute-differences matching over integer disparities with
/// equiangular sub-pixel refinement and a left-right consistency check.
/// Throws ImagesMismatch.
DisparityMap block_match(const ImageF& left, const ImageF& right, const BlockMatchOptions& options);
DisparityMap block_match(const ImageF& left, const ImageF& right, int d_max, int window);

/// Fills invalid pixels along each row with the smaller of the nearest valid
/// disparities on either side (occlusions belong to the background). Rows
/// without any valid pixel become 0. Validity is left untouched.
DisparityMap fill_invalid(const DisparityMap& map);

inline constexpr double kMaxDepthM = 1000.0;

/// z = f_px b / d, capped at kMaxDepthM; non-positive disparities map to the cap.
ImageF disparity_to_depth(const ImageF& disparity, double f_px, double baseline_m);

struct DepthMetrics {
  double avg_log_error = 0.0;
  double rmse_m = 0.0;
  std::size_t count = 0;
};

/// Mean |ln z_hat - ln z| and RMSE over pixels with finite positive gt,
/// positive prediction and (when given) a set mask bit.
DepthMetrics depth_metrics(const ImageF& pred_depth, const ImageF& gt_depth, const Mask* mask = nullptr);

/// Accumulates per-pixel errors over several frames before averaging.
class DepthMetricsAccumulator {
 public:
  void add(const ImageF& pred_depth, const ImageF& gt_depth, const Mask* mask = nullptr);
  DepthMetrics result() const;

 private:
  double sum_log_ = 0.0;
  double sum_sq_ = 0.0;
  std::size_t n_ = 0;
};

double smooth_l1(double x);
double smooth_l1_grad(double x);

/// Affine disparity correction d' = alpha d + beta. Training minimizes the
/// smooth-L1 of the relative residual (d' - d_gt) / d_gt, which removes the
/// baseline and focal scale from the loss. Pixels enter the loss only where
/// both the matcher and the ground truth are valid (confidence gate).
struct DisparityRefiner {
  double alpha = 1.0;
  double beta = 0.0;
  friend bool operator==(const DisparityRefiner&, const DisparityRefiner&) = default;
};

DisparityMap refine_disparity(const DisparityRefiner& model, const DisparityMap& raw);

/// One training sample: matcher output with its gt disparity and gate.
struct RefinerSample {
  std::vector<double> raw;
  std::vector<double> gt;
};

/// Collects gated (raw, gt) pairs. `gt_mask` marks pixels with usable gt.
void collect_refiner_samples(const DisparityMap& raw, const ImageF& gt_disparity, const Mask& gt_mask,
                             RefinerSample& out);

double refiner_loss(const DisparityRefiner& model, const RefinerSample& batch);

/// One gradient-descent step; returns the loss before the update. Throws
/// EmptyBatch.
double refiner_train_step(DisparityRefiner& model, const RefinerSample& batch, double lr);

}  // namespace camforge
