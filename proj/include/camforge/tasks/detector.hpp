// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <span>
#include <vector>

#include "camforge/camera.hpp"
#include "camforge/scene.hpp"

namespace camforge {

/// Axis-aligned pixel box, half-open [x0, x1) x [y0, y1).
struct Box2D {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double area() const noexcept { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }
  friend bool operator==(const Box2D&, const Box2D&) = default;
};

double iou(const Box2D& a, const Box2D& b) noexcept;

struct Detection {
  Box2D box;
  int class_id = 0;
  double score = 0.0;
  int image = 0;  // frame index when pooling several frames
};

struct GtBox2D {
  Box2D box;
  int class_id = 0;
  int image = 0;
};

/// Tight boxes around each scene object's instance pixels; objects with
/// fewer than `min_px` visible pixels are dropped. Obstacles are not objects.
std::vector<GtBox2D> gt_boxes_2d(const Frame& frame, const SceneInstance& scene, int min_px = 30, int image = 0);

/// Intensity histogram (8 bins over [0, 2 x frame mean]), gradient energy in
/// 4 orientation bins, luminance-normalized mean RGB, and the RGB contrast
/// against a surrounding ring (the window grown 1.5x). The ring term lets a
/// linear scorer peak on windows that fit an object rather than sit inside it.
inline constexpr int kHistogramBins = 8;
inline constexpr int kOrientationBins = 4;
inline constexpr int kDescriptorLength = kHistogramBins + kOrientationBins + 3 + 3;
using WindowDescriptor = std::array<double, kDescriptorLength>;

struct WindowGrid {
  std::array<double, 3> scales{0.25, 0.4, 0.6};  // window height over image height
  std::array<double, 3> aspects{0.5, 1.0, 2.0};  // width over height
  double stride_fraction = 0.25;                 // of the window's shorter side
};

/// Integral-image feature extractor for one exposed frame.
class WindowFeatures {
 public:
  explicit WindowFeatures(const ImageF& exposed);
  WindowDescriptor describe(const Box2D& box) const;
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

 private:
  int width_ = 0;
  int height_ = 0;
  double frame_mean_ = 0.0;
  // One (W+1)x(H+1) summed-area table per channel.
  std::vector<std::vector<double>> tables_;
  double sum(int table, int x0, int y0, int x1, int y1) const;
};

std::vector<Box2D> sliding_windows(int width, int height, const WindowGrid& grid = {});

/// One-vs-rest logistic scorer per class over a fixed descriptor.
struct DetectorModel {
  int n_classes = 0;
  std::vector<double> weights;  // n_classes x kDescriptorLength, row-major
  std::vector<double> bias;     // n_classes

  DetectorModel() = default;
  explicit DetectorModel(int n_classes);
  double logit(int class_index, const WindowDescriptor& x) const;
  bool finite() const;
  friend bool operator==(const DetectorModel&, const DetectorModel&) = default;
};

/// Labeled windows. label 0 is background, c >= 1 is object class c.
struct DetectorBatch {
  std::vector<WindowDescriptor> x;
  std::vector<int> label;
  bool empty() const noexcept { return x.empty(); }
};

/// Windows of one frame, positive for class c when IoU >= 0.5 with a gt box
/// of class c (highest IoU wins).
void append_training_windows(const ImageF& exposed, std::span<const GtBox2D> gts, DetectorBatch& out,
                             const WindowGrid& grid = {});

/// Mean binary cross-entropy over all (window, class) pairs: ln 2 at zero weights.
double detector_loss(const DetectorModel& model, const DetectorBatch& batch);

/// Closed-form gradient of detector_loss, laid out like the model.
DetectorModel detector_gradient(const DetectorModel& model, const DetectorBatch& batch);

/// One gradient-descent step; returns the loss before the update. Throws EmptyBatch.
double detector_train_step(DetectorModel& model, const DetectorBatch& batch, double lr);
double detector_train_step(DetectorModel& model, const ImageF& exposed, std::span<const GtBox2D> gts, double lr);

struct InferenceOptions {
  double score_threshold = 0.05;
  double nms_iou = 0.3;
  int max_per_class = 20;
  friend bool operator==(const InferenceOptions&, const InferenceOptions&) = default;
};

/// Scores every window, thresholds, then greedy per-class NMS.
std::vector<Detection> detector_infer(const DetectorModel& model, const ImageF& exposed,
                                      const InferenceOptions& options = {}, int image = 0,
                                      const WindowGrid& grid = {});

/// Greedy NMS in descending score order; ties keep input order.
std::vector<Detection> non_max_suppression(std::vector<Detection> dets, double iou_threshold);

/// Score-ranked greedy matching per image (each gt used once), all-point
/// interpolated area under precision-recall, averaged over classes present
/// in `gts`. 0 when there are no gts.
double average_precision(std::span<const Detection> dets, std::span<const GtBox2D> gts, double iou_threshold = 0.5);

void save_detector(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_detector(const std::filesystem::path& path);

void write_detections_csv(const std::filesystem::path& path, std::span<const Detection> dets);

}  // namespace camforge
