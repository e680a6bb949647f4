// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "camforge/geometry.hpp"
#include "camforge/image.hpp"
#include "camforge/scene.hpp"

namespace camforge {

/// Full parameterization of a candidate camera.
struct CameraDesign {
  double pitch_deg = 0.0;
  double height_m = 1.5;
  double focal_mm = 3.6;
  double sensor_w_mm = 6.2;
  double sensor_h_mm = 4.65;
  double pixel_um = 1.55;
  double exposure_ms = 30.0;
  double gain_db = 15.0;
  double baseline_m = 0.0;  // 0 for monocular
  int n_cameras = 1;
  double aperture_fnum = 2.0;  // accepted, not modeled

  friend bool operator==(const CameraDesign&, const CameraDesign&) = default;
};

struct Intrinsics {
  double f_px = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Native sensor intrinsics: W = floor(1000 w / p), f_px = 1000 f / p.
/// Throws DegenerateSensor when W or H < 8.
Intrinsics intrinsics_of(const CameraDesign& design);

double hfov_deg(const CameraDesign& design);
double vfov_deg(const CameraDesign& design);

/// Focal length (mm) giving horizontal field of view `hfov_deg` on a sensor
/// `w_mm` wide.
double fov_to_focal(double hfov_deg, double w_mm);

double db_to_linear(double gain_db);

struct RenderOptions {
  int max_width = 160;
  int max_height = 120;
  /// Uniform downscale of the native pixel grid applied before the cap.
  double scale = 1.0;
  int supersample = 1;
  /// Radiometric scale; default_kappa() when unset.
  std::optional<double> kappa;
  friend bool operator==(const RenderOptions&, const RenderOptions&) = default;
};

/// Intrinsics of the rendered grid: native scaled by min(scale, cap ratios).
Intrinsics render_intrinsics(const CameraDesign& design, const RenderOptions& options);

struct Pose {
  Vec3 position;
  double yaw_deg = 0.0;  // 0 looks along +y, 90 along +x
  double pitch_deg = 0.0;
  friend bool operator==(const Pose&, const Pose&) = default;
};

Pose pose_from_step(const PathStep& step, const CameraDesign& design);

/// Camera basis in world coordinates.
struct CameraBasis {
  Vec3 forward;
  Vec3 right;
  Vec3 down;
};
CameraBasis camera_basis(const Pose& pose);

/// Pixel coordinates (continuous, pixel centers at +0.5) of a world point,
/// or nullopt behind the camera.
std::optional<std::array<double, 2>> project(const Pose& pose, const Intrinsics& intr, Vec3 world);

struct Frame {
  ImageF irradiance;  // phi, RGB
  ImageF exposed;     // clip(kappa E G phi), RGB
  ImageF depth;       // meters along the optical axis, +inf on escape
  ImageI semantic;
  ImageI instance;
  Pose pose;
  Intrinsics intrinsics;
  std::size_t clipped = 0;
};

struct ExposeResult {
  ImageF image;
  std::size_t clipped = 0;
};

/// I = clip(kappa * E * G_lin * phi), G_lin = 10^(G_db / 20).
ExposeResult expose(const ImageF& irradiance, double exposure_ms, double gain_db, double kappa);

/// Deterministic single-bounce Lambertian ray cast with hard shadows.
Frame render(const SceneInstance& scene, const Pose& pose, const CameraDesign& design,
             const RenderOptions& options);

/// Depth, semantic and instance maps only (no shading); for visibility checks.
Frame render_labels(const SceneInstance& scene, const Pose& pose, const CameraDesign& design,
                    const RenderOptions& options);

/// Bisection for kappa such that a fronto-parallel card of albedo `albedo`
/// under ambient-only lighting at `lux` exposes to `target`.
double calibrate_kappa(double lux, double exposure_ms, double gain_db, double target = 0.5,
                       double albedo = 0.5);

/// Calibrated once for the day preset (20 lux, 30 ms, 15 dB, mid-grey -> 0.5).
double default_kappa();

inline constexpr double kDisparitySentinel = -1.0;

enum class GtFlag : std::uint8_t { kValid = 0, kOccluded = 1, kOutOfRange = 2, kNoSurface = 3 };

struct StereoFrame {
  Frame left;
  Frame right;
  ImageF gt_disparity;  // f_px b / depth_left where seen by both cameras, sentinel elsewhere
  Image<std::uint8_t> gt_flags;
  double baseline_m = 0.0;
};

/// Right camera displaced +b along the camera x axis, optical axes parallel.
/// Disparities >= d_max are flagged out of range.
StereoFrame render_stereo(const SceneInstance& scene, const Pose& pose, const CameraDesign& design,
                          const RenderOptions& options, double d_max = 192.0);

}  // namespace camforge
