// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "camforge/camera.hpp"
#include "camforge/error.hpp"
#include "camforge/tasks/stereo.hpp"

using namespace camforge;

namespace {

SceneInstance textured_wall(double z0, double cycles_per_m) {
  SceneInstance s;
  s.kind = SceneKind::kColorbar;
  s.ambient = 1.0;
  s.illuminance_lux = 20.0;
  Primitive p;
  p.kind = PrimitiveKind::kPlane;
  p.box = {{-500, z0, -500}, {500, z0, 500}};
  p.class_id = 4;
  p.instance_id = 1;
  p.texture = Texture{TextureKind::kCells, {0.9, 0.8, 0.7}, {0.05, 0.1, 0.15}, cycles_per_m, 10.0, 3};
  s.primitives.push_back(p);
  s.bounds = p.box;
  return s;
}

// Reference focal length and pixel pitch on a 160 x 120 sensor crop.
CameraDesign reference_crop() {
  CameraDesign d;
  d.sensor_w_mm = 0.248;
  d.sensor_h_mm = 0.186;
  d.baseline_m = 0.12;
  return d;
}

ImageF random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageF img(w, h, 1);
  for (double& v : img.data()) v = u(rng);
  return img;
}

}  // namespace

TEST(SmoothL1, Values) {
  EXPECT_DOUBLE_EQ(smooth_l1(0.5), 0.125);
  EXPECT_DOUBLE_EQ(smooth_l1(2.0), 1.5);
  EXPECT_DOUBLE_EQ(smooth_l1(-2.0), 1.5);
  EXPECT_DOUBLE_EQ(smooth_l1_grad(0.3), 0.3);
  EXPECT_DOUBLE_EQ(smooth_l1_grad(-4.0), -1.0);
}

TEST(DepthMetrics, PerfectPredictionIsZero) {
  ImageF gt(4, 3, 1, 7.0);
  const DepthMetrics m = depth_metrics(gt, gt);
  EXPECT_EQ(m.avg_log_error, 0.0);
  EXPECT_EQ(m.rmse_m, 0.0);
  EXPECT_EQ(m.count, 12u);
}

TEST(DepthMetrics, ScaledByEGivesUnitLogError) {
  ImageF gt(5, 5, 1, 2.0);
  ImageF pred(5, 5, 1, 2.0 * std::exp(1.0));
  EXPECT_NEAR(depth_metrics(pred, gt).avg_log_error, 1.0, 1e-12);
}

TEST(DepthMetrics, TwoPixelHandCase) {
  ImageF gt(2, 1);
  ImageF pred(2, 1);
  gt.at(0, 0) = 1.0, pred.at(0, 0) = 2.0;
  gt.at(1, 0) = 100.0, pred.at(1, 0) = 50.0;
  const DepthMetrics m = depth_metrics(pred, gt);
  EXPECT_NEAR(m.avg_log_error, std::log(2.0), 1e-12);
  EXPECT_NEAR(m.rmse_m, std::sqrt((1.0 + 2500.0) / 2.0), 1e-9);
  EXPECT_NEAR(m.rmse_m, 35.36, 0.01);
}

TEST(DepthMetrics, MaskAndInfiniteGtExcluded) {
  ImageF gt(3, 1, 1, 4.0);
  ImageF pred(3, 1, 1, 4.0);
  gt.at(0, 0) = std::numeric_limits<double>::infinity();
  pred.at(1, 0) = 40.0;
  Mask m(3, 1, 1, 1);
  m.at(1, 0) = 0;
  const DepthMetrics r = depth_metrics(pred, gt, &m);
  EXPECT_EQ(r.count, 1u);
  EXPECT_EQ(r.avg_log_error, 0.0);
  EXPECT_THROW(depth_metrics(ImageF(2, 2), ImageF(3, 2)), ImagesMismatch);
}

TEST(DepthMetrics, AccumulatorPoolsPixels) {
  DepthMetricsAccumulator acc;
  acc.add(ImageF(1, 1, 1, 2.0), ImageF(1, 1, 1, 1.0));
  acc.add(ImageF(3, 1, 1, 1.0), ImageF(3, 1, 1, 1.0));
  EXPECT_NEAR(acc.result().avg_log_error, std::log(2.0) / 4.0, 1e-12);
}

TEST(DisparityToDepth, InverseAndCap) {
  ImageF d(3, 1);
  d.at(0, 0) = 10.0;
  d.at(1, 0) = 0.0;
  d.at(2, 0) = 1e-9;
  const ImageF z = disparity_to_depth(d, 100.0, 0.5);
  EXPECT_DOUBLE_EQ(z.at(0, 0), 5.0);
  EXPECT_EQ(z.at(1, 0), kMaxDepthM);
  EXPECT_EQ(z.at(2, 0), kMaxDepthM);
}

TEST(BlockMatch, IdenticalImagesGiveZero) {
  const ImageF img = random_image(64, 48, 1);
  const DisparityMap m = block_match(img, img, 16, 5);
  int valid = 0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 64; ++x)
      if (m.valid.at(x, y)) {
        ++valid;
        EXPECT_EQ(m.disparity.at(x, y), 0.0);
      }
  EXPECT_GT(valid, 64 * 48 * 9 / 10);
}

TEST(BlockMatch, TexturelessIsMostlyInvalid) {
  const ImageF flat(64, 48, 3, 0.4);
  const DisparityMap m = block_match(flat, flat, 16, 5);
  int valid = 0;
  for (auto v : m.valid.data()) valid += v;
  EXPECT_LT(valid, 64 * 48 / 20);
}

TEST(BlockMatch, ShiftedNoiseRecoversShift) {
  const ImageF right = random_image(80, 40, 7);
  ImageF left(80, 40, 1);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 80; ++x) left.at(x, y) = right.at(std::max(0, x - 9), y);
  const DisparityMap m = block_match(left, right, 20, 5);
  for (int y = 0; y < 40; ++y)
    for (int x = 12; x < 80; ++x) {
      ASSERT_TRUE(m.valid.at(x, y)) << x << "," << y;
      EXPECT_NEAR(m.disparity.at(x, y), 9.0, 0.25);  // sub-pixel fit on a noisy SAD valley
    }
}

TEST(BlockMatch, Preconditions) {
  EXPECT_THROW(block_match(ImageF(4, 4), ImageF(5, 4), 2, 3), ImagesMismatch);
  EXPECT_THROW(block_match(ImageF(4, 4), ImageF(4, 4), 2, 4), PreconditionError);
  EXPECT_THROW(block_match(ImageF(4, 4), ImageF(4, 4), 2, 1), PreconditionError);
}

TEST(BlockMatch, FrontoParallelPlaneAtTenMetres) {
  const CameraDesign d = reference_crop();
  RenderOptions opt;
  opt.supersample = 2;
  const StereoFrame sf = render_stereo(textured_wall(10.0, 60.0), Pose{}, d, opt);
  const double expected = sf.left.intrinsics.f_px * d.baseline_m / 10.0;
  ASSERT_NEAR(expected, 27.87, 0.01);
  const DisparityMap m = block_match(sf.left.exposed, sf.right.exposed, 192, 5);
  int valid = 0, good = 0;
  for (int y = 0; y < m.valid.height(); ++y)
    for (int x = 0; x < m.valid.width(); ++x)
      if (m.valid.at(x, y)) {
        ++valid;
        good += std::abs(m.disparity.at(x, y) - expected) <= 0.5;
      }
  ASSERT_GT(valid, 0);
  EXPECT_GE(static_cast<double>(good) / valid, 0.95) << good << " / " << valid;
}

TEST(FillInvalid, UsesSmallerNeighbour) {
  DisparityMap m{ImageF(6, 2), Mask(6, 2)};
  m.disparity.at(0, 0) = 8.0, m.valid.at(0, 0) = 1;
  m.disparity.at(4, 0) = 3.0, m.valid.at(4, 0) = 1;
  const DisparityMap f = fill_invalid(m);
  for (int x = 1; x < 4; ++x) EXPECT_EQ(f.disparity.at(x, 0), 3.0);
  EXPECT_EQ(f.disparity.at(5, 0), 3.0);
  for (int x = 0; x < 6; ++x) EXPECT_EQ(f.disparity.at(x, 1), 0.0);
  EXPECT_EQ(f.valid, m.valid);
}

TEST(Refiner, ZeroLearningRateIsIdentity) {
  RefinerSample b{{10.0, 20.0}, {11.0, 19.0}};
  DisparityRefiner r{1.3, -0.4};
  const DisparityRefiner before = r;
  refiner_train_step(r, b, 0.0);
  EXPECT_EQ(r, before);
  EXPECT_THROW(refiner_train_step(r, RefinerSample{}, 0.1), EmptyBatch);
}

TEST(Refiner, ConvergesFromPerturbedStart) {
  // Matcher output with a known affine distortion d_raw = (d_gt - 0.6) / 1.08.
  RefinerSample b;
  for (int i = 0; i < 200; ++i) {
    const double g = 2.0 + 0.15 * i;
    b.gt.push_back(g);
    b.raw.push_back((g - 0.6) / 1.08);
  }
  DisparityRefiner r{0.7, 2.0};
  double first = refiner_loss(r, b);
  for (int k = 0; k < 20000; ++k) refiner_train_step(r, b, 2.0);
  EXPECT_LT(refiner_loss(r, b), 1e-3 * first);
  EXPECT_NEAR(r.alpha, 1.08, 0.01);
  EXPECT_NEAR(r.beta, 0.6, 0.05);
}

TEST(Refiner, GradientMatchesFiniteDifference) {
  RefinerSample b{{3.0, 7.5, 12.0, 40.0}, {3.4, 7.0, 14.0, 38.0}};
  for (DisparityRefiner r : {DisparityRefiner{1.0, 0.0}, DisparityRefiner{1.4, -2.0}, DisparityRefiner{0.2, 9.0}}) {
    const double h = 1e-6;
    const double ga = (refiner_loss({r.alpha + h, r.beta}, b) - refiner_loss({r.alpha - h, r.beta}, b)) / (2 * h);
    const double gb = (refiner_loss({r.alpha, r.beta + h}, b) - refiner_loss({r.alpha, r.beta - h}, b)) / (2 * h);
    DisparityRefiner s = r;
    refiner_train_step(s, b, 1.0);
    EXPECT_NEAR(r.alpha - s.alpha, ga, 1e-6);
    EXPECT_NEAR(r.beta - s.beta, gb, 1e-6);
  }
}

TEST(Refiner, GateSkipsInvalidPixels) {
  DisparityMap raw{ImageF(3, 1, 1, 5.0), Mask(3, 1, 1, 1)};
  raw.valid.at(0, 0) = 0;
  ImageF gt(3, 1, 1, 5.0);
  gt.at(2, 0) = kDisparitySentinel;
  Mask gate(3, 1, 1, 1);
  RefinerSample s;
  collect_refiner_samples(raw, gt, gate, s);
  EXPECT_EQ(s.raw.size(), 1u);
}

TEST(DepthDisparityDuality, RoundTripOnRenderedGt) {
  CameraDesign d = reference_crop();
  const StereoFrame sf = render_stereo(textured_wall(10.0, 60.0), Pose{}, d, RenderOptions{});
  const ImageF z = disparity_to_depth(sf.gt_disparity, sf.left.intrinsics.f_px, d.baseline_m);
  for (int y = 0; y < z.height(); ++y)
    for (int x = 0; x < z.width(); ++x)
      if (sf.gt_flags.at(x, y) == static_cast<std::uint8_t>(GtFlag::kValid))
        EXPECT_NEAR(z.at(x, y), sf.left.depth.at(x, y), 1e-9 * sf.left.depth.at(x, y));
}

TEST(Refiner, PerfectMatcherConvergesToIdentity) {
  RefinerSample b;
  for (int i = 0; i < 50; ++i) {
    b.raw.push_back(1.0 + 0.06 * i);
    b.gt.push_back(1.0 + 0.06 * i);
  }
  DisparityRefiner r{1.1, 0.2};
  double prev = refiner_loss(r, b);
  for (int k = 0; k < 500; ++k) {
    const double loss = refiner_train_step(r, b, 1.0);
    EXPECT_LE(loss, prev + 1e-15);
    prev = loss;
  }
  EXPECT_NEAR(r.alpha, 1.0, 1e-3);
  EXPECT_NEAR(r.beta, 0.0, 1e-3);
}
