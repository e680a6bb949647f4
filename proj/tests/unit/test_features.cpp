// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "camforge/camera.hpp"
#include "camforge/error.hpp"
#include "camforge/noise.hpp"
#include "camforge/scene.hpp"
#include "camforge/tasks/features.hpp"

using namespace camforge;

namespace {

ImageF white_square(int size, int x0, int y0, int side) {
  ImageF img(size, size, 1, 0.0);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) img.at(x, y) = 1.0;
  return img;
}

ImageF checkerboard(int squares, int px) {
  const int margin = 24;
  const int n = squares * px + 2 * margin;
  ImageF img(n, n, 1, 0.5);
  for (int y = 0; y < squares * px; ++y)
    for (int x = 0; x < squares * px; ++x)
      img.at(margin + x, margin + y) = ((x / px + y / px) % 2) ? 0.9 : 0.1;
  return img;
}

// Planted correspondences: 20 points, the last 5 moved off the translation.
std::vector<Correspondence> planted(double dx, double dy) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 150.0);
  std::vector<Correspondence> m;
  for (int i = 0; i < 20; ++i) {
    const double x = u(rng), y = u(rng);
    Correspondence c{{x, y}, {x + dx, y + dy}};
    if (i >= 15) c.b = {u(rng), u(rng)};
    m.push_back(c);
  }
  return m;
}

struct IndoorFixture {
  SceneInstance scene;
  AgentPath path;
};

const IndoorFixture& indoor() {
  static const IndoorFixture f = [] {
    SceneSpec spec;
    spec.seed = 3;
    IndoorFixture out;
    out.scene = generate_scene(spec);
    out.path = plan_path(out.scene, 40, 3);
    return out;
  }();
  return f;
}

}  // namespace

TEST(Corners, FlatImageHasNone) {
  EXPECT_TRUE(detect_corners(ImageF(64, 64, 1, 0.3), 100).empty());
  EXPECT_THROW(detect_corners(ImageF(31, 64, 1, 0.3), 100), PreconditionError);
}

TEST(Corners, SquareVertices) {
  const FeatureSet f = detect_corners(white_square(96, 30, 34, 30), 4);
  ASSERT_EQ(f.size(), 4u);
  const std::array<std::array<double, 2>, 4> vertices = {{{30, 34}, {60, 34}, {30, 64}, {60, 64}}};
  for (const auto& v : vertices) {
    double best = 1e9;
    for (const Keypoint& k : f.keypoints) best = std::min(best, std::hypot(k.x + 0.5 - v[0], k.y + 0.5 - v[1]));
    EXPECT_LE(best, 2.0) << v[0] << "," << v[1];
  }
}

TEST(Corners, CheckerboardHasManyCorners) {
  EXPECT_GE(detect_corners(checkerboard(8, 14), 2000).size(), 40u);
}

TEST(Corners, MaxNKeepsStrongest) {
  const ImageF img = checkerboard(8, 14);
  const FeatureSet all = detect_corners(img, 2000);
  const FeatureSet few = detect_corners(img, 10);
  ASSERT_EQ(few.size(), 10u);
  for (std::size_t i = 0; i < few.size(); ++i) EXPECT_EQ(few.keypoints[i].response, all.keypoints[i].response);
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_GE(all.keypoints[i - 1].response, all.keypoints[i].response);
}

TEST(Corners, Deterministic) {
  const Frame fr = render(indoor().scene, pose_from_step(indoor().path.steps[5], CameraDesign{}), CameraDesign{},
                          RenderOptions{});
  const FeatureSet a = detect_corners(fr.exposed, 2000);
  const FeatureSet b = detect_corners(fr.exposed, 2000);
  EXPECT_EQ(a.descriptors, b.descriptors);
  EXPECT_GT(a.size(), 0u);
}

TEST(Descriptor, HammingBasics) {
  Descriptor a{}, b{};
  EXPECT_EQ(hamming(a, b), 0);
  b[0] = 0b1011;
  b[3] = 1ULL << 63;
  EXPECT_EQ(hamming(a, b), 4);
}

TEST(Homography, RecoversProjectiveMap) {
  const Homography truth = {1.1, 0.05, 4.0, -0.03, 0.95, -2.0, 1e-4, -2e-4, 1.0};
  std::array<Correspondence, 4> pts;
  const std::array<std::array<double, 2>, 4> src = {{{10, 12}, {140, 8}, {130, 110}, {5, 100}}};
  for (int i = 0; i < 4; ++i) pts[i] = {src[i], apply_homography(truth, src[i])};
  Homography h{};
  ASSERT_TRUE(homography_from_4(std::span<const Correspondence, 4>(pts), h));
  for (int i = 0; i < 9; ++i) EXPECT_NEAR(h[i], truth[i], 1e-9);
  pts[2].a = {75, 10};  // collinear with the first two
  EXPECT_FALSE(homography_from_4(std::span<const Correspondence, 4>(pts), h));
}

TEST(Ransac, PlantedTranslation) {
  const auto m = planted(7.0, -3.5);
  const int n = ransac_inliers(m, RansacOptions{});
  EXPECT_NEAR(n, 15, 1);
}

TEST(Ransac, EmptyAndTooFew) {
  EXPECT_EQ(ransac_inliers({}, RansacOptions{}), 0);
  const auto m = planted(1, 1);
  EXPECT_EQ(ransac_inliers(std::span(m).first(3), RansacOptions{}), 0);
  const MatchResult r = match_and_ransac(FeatureSet{}, detect_corners(checkerboard(8, 14), 2000));
  EXPECT_EQ(r.n_inlier, 0);
  EXPECT_EQ(r.n_total, 0);
  EXPECT_EQ(r.inlier_ratio(), 0.0);
}

TEST(Ransac, MonotoneInThresholdAndDeterministic) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> jitter(0.0, 1.5);
  std::vector<Correspondence> m;
  for (auto c : planted(3.0, 2.0)) {
    c.b[0] += jitter(rng);
    c.b[1] += jitter(rng);
    m.push_back(c);
  }
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    int prev = -1;
    for (double thr : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      const int n = ransac_inliers(m, RansacOptions{200, thr, seed});
      EXPECT_GE(n, prev);
      EXPECT_EQ(n, ransac_inliers(m, RansacOptions{200, thr, seed}));
      prev = n;
    }
  }
}

TEST(Matching, IdenticalFramesSelfMatch) {
  const Frame fr = render(indoor().scene, pose_from_step(indoor().path.steps[10], CameraDesign{}), CameraDesign{},
                          RenderOptions{});
  const FeatureSet f = detect_corners(fr.exposed, 2000);
  ASSERT_GE(f.size(), 10u);
  const MatchResult r = match_and_ransac(f, f);
  EXPECT_GE(r.inlier_ratio(), 0.9);
  EXPECT_LE(r.n_inlier, r.n_total);
}

TEST(Matching, ShiftedImageMatchesByTranslation) {
  const ImageF base = to_gray(render(indoor().scene, pose_from_step(indoor().path.steps[10], CameraDesign{}),
                                     CameraDesign{}, RenderOptions{})
                                  .exposed);
  ImageF moved(base.width(), base.height(), 1);
  for (int y = 0; y < base.height(); ++y)
    for (int x = 0; x < base.width(); ++x) moved.at(x, y) = base.at(std::max(0, x - 4), std::max(0, y - 2));
  const auto matches = match_features(detect_corners(base, 2000), detect_corners(moved, 2000));
  ASSERT_GE(matches.size(), 4u);
  int exact = 0;
  for (const auto& c : matches) exact += c.b[0] - c.a[0] == 4.0 && c.b[1] - c.a[1] == 2.0;
  EXPECT_GE(exact, static_cast<int>(matches.size() * 9 / 10));
}

TEST(Matching, NightNoiseDoesNotBeatDay) {
  // Same frames, day (20 lux, 5 dB) vs night (2 lux, 15 dB) exposure and noise.
  const NoiseModel model;
  auto mean_inliers = [&](double lux, double gain_db) {
    SceneSpec spec;
    spec.seed = 3;
    spec.illuminance_lux = lux;
    const SceneInstance scene = generate_scene(spec);
    CameraDesign d;
    d.gain_db = gain_db;
    const NoiseModel m = generalize(model, db_to_linear(gain_db), d.pixel_um * d.pixel_um);
    double total = 0.0;
    int pairs = 0;
    for (int s = 0; s + 1 < 12; s += 2) {
      const auto& path = indoor().path;
      const ImageF a = synthesize(render(scene, pose_from_step(path.steps[s], d), d, {}).exposed, m, 100 + s);
      const ImageF b = synthesize(render(scene, pose_from_step(path.steps[s + 1], d), d, {}).exposed, m, 200 + s);
      total += match_and_ransac(detect_corners(a, 2000), detect_corners(b, 2000)).n_inlier;
      ++pairs;
    }
    return total / pairs;
  };
  EXPECT_LE(mean_inliers(2.0, 15.0), mean_inliers(20.0, 5.0));
}
