// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "camforge/camera.hpp"
#include "camforge/error.hpp"

using namespace camforge;

namespace {

// One large plane facing the camera at distance z0 along +y.
SceneInstance wall_scene(double z0, TextureKind tex = TextureKind::kCells, double ambient = 1.0) {
  SceneInstance s;
  s.kind = SceneKind::kColorbar;
  s.ambient = ambient;
  s.illuminance_lux = 20.0;
  Primitive p;
  p.kind = PrimitiveKind::kPlane;
  p.box = {{-500, z0, -500}, {500, z0, 500}};
  p.class_id = 4;
  p.instance_id = 9;
  p.texture = Texture{tex, {0.8, 0.7, 0.6}, {0.1, 0.15, 0.2}, 8.0, 10.0, 77};
  s.primitives.push_back(p);
  s.bounds = p.box;
  return s;
}

// f_px = 100, 160 x 120 native.
CameraDesign small_camera() {
  CameraDesign d;
  d.focal_mm = 1.0;
  d.pixel_um = 10.0;
  d.sensor_w_mm = 1.6;
  d.sensor_h_mm = 1.2;
  return d;
}

double mean_of(const ImageF& img) {
  const auto d = img.data();
  return std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
}

}  // namespace

TEST(Intrinsics, ReferenceSensor) {
  CameraDesign d;  // 6.2 x 4.65 mm, f 3.6 mm, 1.55 um
  const Intrinsics in = intrinsics_of(d);
  EXPECT_EQ(in.width, 4000);
  EXPECT_EQ(in.height, 3000);
  EXPECT_NEAR(in.f_px, 2322.58, 0.01);
  EXPECT_DOUBLE_EQ(in.cx, 2000.0);
  EXPECT_DOUBLE_EQ(in.cy, 1500.0);
  EXPECT_NEAR(hfov_deg(d), 81.47, 0.01);
}

TEST(Intrinsics, DegenerateSensor) {
  CameraDesign d;
  d.pixel_um = 1000.0 * d.sensor_w_mm;
  EXPECT_THROW(intrinsics_of(d), DegenerateSensor);
  d = CameraDesign{};
  d.focal_mm = 0.0;
  EXPECT_THROW(intrinsics_of(d), DegenerateSensor);
}

TEST(Intrinsics, DoublingPixelHalvesEverything) {
  CameraDesign d;
  const Intrinsics a = intrinsics_of(d);
  d.pixel_um *= 2.0;
  const Intrinsics b = intrinsics_of(d);
  EXPECT_EQ(b.width * 2, a.width);
  EXPECT_EQ(b.height * 2, a.height);
  EXPECT_DOUBLE_EQ(b.f_px * 2.0, a.f_px);
}

TEST(FovToFocal, ClosedForms) {
  EXPECT_NEAR(fov_to_focal(90.0, 2.0), 1.0, 1e-12);
  EXPECT_NEAR(fov_to_focal(50.0, 1.536), 1.647, 5e-4);
  EXPECT_THROW(fov_to_focal(0.0, 1.0), PreconditionError);
  EXPECT_THROW(fov_to_focal(180.0, 1.0), PreconditionError);
}

TEST(FovToFocal, RoundTripsWithIntrinsics) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> f(0.5, 30.0);
  for (int i = 0; i < 200; ++i) {
    CameraDesign d;
    d.focal_mm = f(rng);
    EXPECT_NEAR(fov_to_focal(hfov_deg(d), d.sensor_w_mm), d.focal_mm, 1e-9 * d.focal_mm);
  }
}

TEST(RenderIntrinsics, CapScalesFocalWithWidth) {
  CameraDesign d;
  const Intrinsics r = render_intrinsics(d, RenderOptions{});
  EXPECT_EQ(r.width, 160);
  EXPECT_EQ(r.height, 120);
  EXPECT_NEAR(r.f_px, intrinsics_of(d).f_px * 160.0 / 4000.0, 1e-12);
  RenderOptions scaled;
  scaled.scale = 0.02;
  EXPECT_EQ(render_intrinsics(d, scaled).width, 80);
}

TEST(Render, FrontoParallelPlaneDepthAndLabels) {
  const SceneInstance s = wall_scene(7.5);
  const Frame f = render(s, Pose{}, small_camera(), RenderOptions{});
  ASSERT_EQ(f.depth.width(), 160);
  for (double z : f.depth.data()) EXPECT_NEAR(z, 7.5, 1e-9);
  for (int id : f.semantic.data()) EXPECT_EQ(id, 4);
  for (int id : f.instance.data()) EXPECT_EQ(id, 9);
}

TEST(Render, MissesReturnSkyAndInfiniteDepth) {
  SceneInstance s = wall_scene(5.0);
  s.primitives.clear();
  s.sky = 0.5;
  const Frame f = render(s, Pose{}, small_camera(), RenderOptions{});
  for (double z : f.depth.data()) EXPECT_TRUE(std::isinf(z));
  for (int id : f.semantic.data()) EXPECT_EQ(id, 0);
  for (double v : f.irradiance.data()) EXPECT_DOUBLE_EQ(v, 10.0);
}

TEST(Render, DarkFrame) {
  const SceneInstance s = wall_scene(5.0, TextureKind::kCells, 0.0);
  const Frame f = render(s, Pose{}, small_camera(), RenderOptions{});
  for (double v : f.irradiance.data()) EXPECT_EQ(v, 0.0);
  for (double v : f.exposed.data()) EXPECT_EQ(v, 0.0);
}

TEST(Render, SupersampleKeepsFlatWallMean) {
  const SceneInstance s = wall_scene(5.0, TextureKind::kFlat);
  RenderOptions one;
  RenderOptions two;
  two.supersample = 2;
  const double a = mean_of(render(s, Pose{}, small_camera(), one).exposed);
  const double b = mean_of(render(s, Pose{}, small_camera(), two).exposed);
  EXPECT_NEAR(a, b, 1e-6);
}

TEST(Render, PointLightShadowAndFalloff) {
  SceneInstance s = wall_scene(4.0, TextureKind::kFlat, 0.0);
  s.lights.push_back({{0.0, 2.0, 0.0}, 4.0});  // 2 m in front of the wall
  const CameraDesign cam = small_camera();
  const Frame lit = render(s, Pose{{0, 0, 0}, 0, 0}, cam, RenderOptions{});
  // Center pixel sees the wall point right behind the light: cos 1, d 2.
  const double center = lit.irradiance.at(80, 60, 0);
  EXPECT_NEAR(center, 20.0 * 0.8 * 4.0 / 4.0, 0.05);
  // A blocker between the light and the wall darkens the wall behind it.
  Primitive blocker;
  blocker.box = {{-0.2, 2.5, -0.2}, {0.2, 2.6, 0.2}};
  blocker.class_id = 1;
  blocker.instance_id = 2;
  s.primitives.push_back(blocker);
  const Frame shadowed = render(s, Pose{{0, 0, 0}, 0, 0}, cam, RenderOptions{});
  EXPECT_EQ(shadowed.semantic.at(80, 60), 1);
  // Wall point at x = 0.5 is outside the blocker's silhouette but in its shadow.
  EXPECT_EQ(shadowed.semantic.at(92, 60), 4);
  EXPECT_EQ(shadowed.irradiance.at(92, 60, 0), 0.0);
  EXPECT_GT(lit.irradiance.at(92, 60, 0), 0.0);
  EXPECT_GT(shadowed.irradiance.at(5, 5, 0), 0.0);
}

TEST(Render, IsDeterministic) {
  const SceneInstance s = wall_scene(6.0);
  const Frame a = render(s, Pose{{0.1, 0, 1}, 10, -5}, small_camera(), RenderOptions{});
  const Frame b = render(s, Pose{{0.1, 0, 1}, 10, -5}, small_camera(), RenderOptions{});
  EXPECT_EQ(a.exposed, b.exposed);
  EXPECT_EQ(a.depth, b.depth);
}

TEST(Projection, MatchesRenderedCentroid) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const CameraDesign cam = small_camera();
  const Intrinsics intr = render_intrinsics(cam, RenderOptions{});
  int checked = 0;
  while (checked < 100) {
    const Pose pose{{u(rng), u(rng), 1.0 + u(rng)}, 40.0 * u(rng), 20.0 * u(rng)};
    const CameraBasis b = camera_basis(pose);
    const double z = 4.0 + 3.0 * (u(rng) + 1.0);
    const Vec3 p = pose.position + b.forward * z + b.right * (0.5 * z * u(rng) * 0.6) +
                   b.down * (0.5 * z * u(rng) * 0.45);
    const auto uv = project(pose, intr, p);
    ASSERT_TRUE(uv.has_value());
    const double half = 2.0 * z / intr.f_px;
    SceneInstance s;
    s.primitives.push_back({PrimitiveKind::kBox, {p - Vec3{half, half, half}, p + Vec3{half, half, half}}, 1, 1, {}});
    const Frame f = render_labels(s, pose, cam, RenderOptions{});
    double sx = 0, sy = 0, n = 0;
    for (int y = 0; y < f.depth.height(); ++y)
      for (int x = 0; x < f.depth.width(); ++x)
        if (f.instance.at(x, y) == 1) {
          sx += x + 0.5;
          sy += y + 0.5;
          n += 1;
        }
    if (n < 4) continue;
    EXPECT_NEAR(sx / n, (*uv)[0], 0.5);
    EXPECT_NEAR(sy / n, (*uv)[1], 0.5);
    ++checked;
  }
}

TEST(Expose, LinearityAndClipping) {
  ImageF phi(4, 1, 1);
  phi.at(0, 0) = 0.0;
  phi.at(1, 0) = 1.0;
  phi.at(2, 0) = 2.0;
  phi.at(3, 0) = 1e6;
  const auto a = expose(phi, 10.0, 0.0, 0.01);
  const auto b = expose(phi, 20.0, 0.0, 0.01);
  EXPECT_EQ(a.image.at(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(a.image.at(1, 0), 0.1);
  EXPECT_DOUBLE_EQ(b.image.at(1, 0), 2.0 * a.image.at(1, 0));
  EXPECT_DOUBLE_EQ(b.image.at(2, 0), 2.0 * a.image.at(2, 0));
  EXPECT_EQ(a.image.at(3, 0), 1.0);
  EXPECT_EQ(a.clipped, 1u);
  EXPECT_NEAR(expose(phi, 10.0, 20.0, 0.01).image.at(1, 0), 1.0, 1e-12);  // 20 dB = x10
  EXPECT_THROW(expose(phi, 10.0, 0.0, 0.0), PreconditionError);
}

TEST(Expose, MonotoneInExposureGainAndIrradiance) {
  ImageF phi(1, 1, 1, 3.0);
  double prev = -1.0;
  for (double g = 0.0; g <= 30.0; g += 2.0) {
    const double v = expose(phi, 5.0, g, 1e-3).image.at(0, 0);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Kappa, MidGreyLandsAtHalf) {
  const double kappa = default_kappa();
  // Closed form for the ambient-only grey card: 0.5 / (E G lux albedo).
  EXPECT_NEAR(kappa, 0.5 / (30.0 * db_to_linear(15.0) * 20.0 * 0.5), 1e-12);
  EXPECT_NEAR(kappa, 2.9644e-4, 1e-7);
  const SceneInstance bars = make_colorbar_target(3);
  CameraDesign cam = small_camera();
  cam.exposure_ms = 30.0;
  cam.gain_db = 15.0;
  cam.sensor_w_mm = 0.1;  // middle bar only
  cam.sensor_h_mm = 0.1;
  const Frame f = render(bars, Pose{}, cam, RenderOptions{});
  for (double v : f.exposed.data()) EXPECT_NEAR(v, 0.5, 1e-9);
}

TEST(Colorbar, NoiselessBarsHaveZeroVariance) {
  const SceneInstance bars = make_colorbar_target(11);
  const Frame f = render(bars, Pose{}, small_camera(), RenderOptions{});
  std::vector<double> lo(12, 1e9), hi(12, -1e9);
  for (int y = 0; y < f.depth.height(); ++y)
    for (int x = 0; x < f.depth.width(); ++x) {
      const int id = f.semantic.at(x, y);
      if (id == 0) continue;
      lo[static_cast<std::size_t>(id)] = std::min(lo[static_cast<std::size_t>(id)], f.exposed.at(x, y, 0));
      hi[static_cast<std::size_t>(id)] = std::max(hi[static_cast<std::size_t>(id)], f.exposed.at(x, y, 0));
    }
  for (int k = 1; k <= 11; ++k) {
    ASSERT_LT(lo[static_cast<std::size_t>(k)], 1e8) << "bar " << k << " not visible";
    EXPECT_EQ(lo[static_cast<std::size_t>(k)], hi[static_cast<std::size_t>(k)]);
  }
}

TEST(Stereo, PlaneDisparityAtReferenceFocal) {
  // A narrow strip of the reference sensor keeps f_px = 2322.6 natively.
  CameraDesign d;
  d.sensor_w_mm = 0.155;
  d.sensor_h_mm = 0.031;
  d.baseline_m = 0.12;
  RenderOptions opt;
  opt.max_width = 1000;
  const StereoFrame sf = render_stereo(wall_scene(10.0), Pose{}, d, opt);
  ASSERT_EQ(sf.gt_disparity.width(), 100);
  int valid = 0;
  for (int y = 0; y < sf.gt_disparity.height(); ++y)
    for (int x = 28; x < sf.gt_disparity.width(); ++x) {
      EXPECT_EQ(sf.gt_flags.at(x, y), static_cast<std::uint8_t>(GtFlag::kValid));
      EXPECT_NEAR(sf.gt_disparity.at(x, y), 27.87, 0.01);
      ++valid;
    }
  EXPECT_GT(valid, 0);
  // Columns whose match falls off the right image are not seen by both cameras.
  EXPECT_EQ(sf.gt_disparity.at(0, 0), kDisparitySentinel);
}

TEST(Stereo, SmallBaselineGivesSmallDisparity) {
  CameraDesign d = small_camera();
  d.baseline_m = 1e-6;
  const StereoFrame sf = render_stereo(wall_scene(10.0), Pose{}, d, RenderOptions{});
  for (double v : sf.gt_disparity.data()) EXPECT_LT(std::abs(v), 1e-4);
  d.baseline_m = 0.0;
  EXPECT_THROW(render_stereo(wall_scene(10.0), Pose{}, d, RenderOptions{}), PreconditionError);
}

TEST(Stereo, LargeDisparityFlaggedOutOfRange) {
  CameraDesign d = small_camera();
  d.sensor_w_mm = 4.0;  // 400 px wide so 200 px disparities stay in view
  d.baseline_m = 1.0;
  RenderOptions opt;
  opt.max_width = 400;
  const StereoFrame sf = render_stereo(wall_scene(0.5), Pose{}, d, opt, 192.0);  // d = 200
  int out_of_range = 0;
  for (auto f : sf.gt_flags.data()) out_of_range += f == static_cast<std::uint8_t>(GtFlag::kOutOfRange);
  EXPECT_GT(out_of_range, 0);
  for (auto f : sf.gt_flags.data()) EXPECT_NE(f, static_cast<std::uint8_t>(GtFlag::kValid));
}

TEST(Stereo, LeftRightPhotometricConsistency) {
  CameraDesign d = small_camera();
  const double z = 10.37;
  d.baseline_m = z * 0.05;  // disparity exactly 5 px
  const StereoFrame sf = render_stereo(wall_scene(z), Pose{}, d, RenderOptions{});
  for (int y = 0; y < 120; ++y)
    for (int x = 5; x < 160; ++x)
      for (int c = 0; c < 3; ++c)
        ASSERT_NEAR(sf.left.exposed.at(x, y, c), sf.right.exposed.at(x - 5, y, c), 1e-6);
}
