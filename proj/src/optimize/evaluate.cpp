// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "camforge/error.hpp"
#include "camforge/optimize.hpp"
#include "camforge/rng.hpp"

namespace camforge {

namespace {

NoiseModel noise_for(const NoiseModel& base, const CameraDesign& d) {
  return generalize(base, db_to_linear(d.gain_db), d.pixel_um * d.pixel_um);
}

int detector_classes(const SceneInstance& scene) {
  int n = 1;
  for (const GtBox& b : scene.gt_boxes) n = std::max(n, b.class_id);
  return n;
}

// Frames too small for the detector yield no features rather than an error.
FeatureSet features_of(const ImageF& image, const CornerOptions& options) {
  if (image.width() < kMinFeatureImageSize || image.height() < kMinFeatureImageSize) return {};
  return detect_corners(image, options);
}

FitnessReport run_stereo(const CameraDesign& d, const EvalContext& ctx, const TrainableModels& models,
                         std::uint64_t noise_base, Capture* capture) {
  const TaskSettings& t = ctx.tasks;
  const NoiseModel noise = noise_for(ctx.noise, d);
  const Intrinsics native = intrinsics_of(d);
  const Intrinsics intr = render_intrinsics(d, t.render);
  // Disparity range in rendered pixels covers the same depths as the native range.
  const int d_max = std::max(8, static_cast<int>(std::lround(t.d_max_native * intr.f_px / native.f_px)));

  DepthMetricsAccumulator acc;
  const auto steps = capture_steps(*ctx.path, ctx.frames_per_eval, Experiment::kStereoDepth);
  for (std::size_t f = 0; f < steps.size(); ++f) {
    const Pose pose = pose_from_step(ctx.path->steps[steps[f]], d);
    const StereoFrame sf = render_stereo(*ctx.scene, pose, d, t.render, d_max);
    const ImageF left = synthesize(sf.left.exposed, noise, derive_seed(noise_base, {f, 0}), t.sampler);
    const ImageF right = synthesize(sf.right.exposed, noise, derive_seed(noise_base, {f, 1}), t.sampler);
    const DisparityMap raw = block_match(left, right, d_max, t.block_window);
    const DisparityMap filled = fill_invalid(refine_disparity(models.refiner, raw));
    const ImageF depth = disparity_to_depth(filled.disparity, sf.left.intrinsics.f_px, d.baseline_m);

    Mask gt_valid(sf.gt_flags.width(), sf.gt_flags.height(), 1, 0);
    for (int y = 0; y < gt_valid.height(); ++y)
      for (int x = 0; x < gt_valid.width(); ++x)
        gt_valid.at(x, y) = sf.gt_flags.at(x, y) == static_cast<std::uint8_t>(GtFlag::kValid);
    acc.add(depth, sf.left.depth, t.stereo_mask == StereoMask::kGtValid ? &gt_valid : nullptr);
    if (capture) collect_refiner_samples(raw, sf.gt_disparity, gt_valid, capture->refiner);
  }
  FitnessReport r;
  r.depth = acc.result();
  if (r.depth.count == 0) throw InsufficientData("no pixel with usable ground-truth depth");
  r.fitness = fitness_stereo(r.depth);
  r.frames = static_cast<int>(2 * steps.size());
  return r;
}

FitnessReport run_mono(const CameraDesign& d, const EvalContext& ctx, const TrainableModels& models,
                       std::uint64_t noise_base, std::uint64_t ransac_base, Capture* capture) {
  const TaskSettings& t = ctx.tasks;
  const NoiseModel noise = noise_for(ctx.noise, d);
  CornerOptions corners;
  corners.max_n = t.max_features;

  FitnessReport r;
  std::vector<Detection> dets;
  std::vector<GtBox2D> gts;
  double inlier_sum = 0.0;
  const auto steps = capture_steps(*ctx.path, ctx.frames_per_eval, Experiment::kMonoMr);
  for (std::size_t f = 0; f < steps.size(); ++f) {
    const int image = static_cast<int>(f);
    const auto& s0 = ctx.path->steps[steps[f]];
    const auto& s1 = ctx.path->steps[steps[f] + 1];
    const Frame fa = render(*ctx.scene, pose_from_step(s0, d), d, t.render);
    const Frame fb = render(*ctx.scene, pose_from_step(s1, d), d, t.render);
    const ImageF a = synthesize(fa.exposed, noise, derive_seed(noise_base, {f, 0}), t.sampler);
    const ImageF b = synthesize(fb.exposed, noise, derive_seed(noise_base, {f, 1}), t.sampler);

    RansacOptions ro;
    ro.iterations = t.ransac_iterations;
    ro.inlier_px = t.inlier_px;
    ro.seed = derive_seed(ransac_base, {f});
    const MatchResult m = match_and_ransac(features_of(a, corners), features_of(b, corners), ro, t.ratio_test);
    r.match.n_inlier += m.n_inlier;
    r.match.n_total += m.n_total;
    inlier_sum += m.n_inlier;

    const auto frame_gts = gt_boxes_2d(fa, *ctx.scene, t.gt_min_px, image);
    const auto frame_dets = detector_infer(models.detector, a, t.inference, image);
    gts.insert(gts.end(), frame_gts.begin(), frame_gts.end());
    dets.insert(dets.end(), frame_dets.begin(), frame_dets.end());
    if (capture) append_training_windows(a, frame_gts, capture->detector);
  }
  r.mean_inliers = steps.empty() ? 0.0 : inlier_sum / static_cast<double>(steps.size());
  r.ap = average_precision(dets, gts);
  r.obstacles = obstacle_visibility(*ctx.scene, *ctx.path, d, t.render, t.obstacle_min_px);
  r.fitness = fitness_mono(r.mean_inliers, r.match.inlier_ratio(), r.ap, r.obstacles.ratio(), ctx.weights);
  r.frames = static_cast<int>(2 * steps.size());
  return r;
}

FitnessReport run_tasks(const CameraDesign& d, const EvalContext& ctx, const TrainableModels& models,
                        std::uint64_t noise_base, std::uint64_t ransac_base, Capture* capture) {
  if (!ctx.scene || !ctx.path) throw PreconditionError("evaluation context needs a scene and a path");
  return ctx.experiment == Experiment::kStereoDepth ? run_stereo(d, ctx, models, noise_base, capture)
                                                    : run_mono(d, ctx, models, noise_base, ransac_base, capture);
}

}  // namespace

std::string to_string(Experiment e) { return e == Experiment::kStereoDepth ? "stereo_depth" : "mono_mr"; }

Experiment experiment_from_string(const std::string& s) {
  if (s == "stereo_depth") return Experiment::kStereoDepth;
  if (s == "mono_mr") return Experiment::kMonoMr;
  throw ConfigError("unknown experiment '" + s + "' (expected stereo_depth or mono_mr)");
}

std::vector<std::size_t> capture_steps(const AgentPath& path, int frames, Experiment experiment) {
  // Mono frames are paired with the following step.
  const std::size_t usable = experiment == Experiment::kMonoMr && !path.steps.empty() ? path.steps.size() - 1
                                                                                      : path.steps.size();
  if (usable == 0 || frames < 1) throw PreconditionError("path too short for the requested frames");
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(frames), usable);
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = ((2 * i + 1) * usable) / (2 * n);
  return out;
}

FitnessReport evaluate(const Genome& genome, const EvalContext& ctx, const TrainableModels& models, int generation,
                       int slot, int genome_id, Capture* capture) {
  try {
    const CameraDesign d = decode(genome, ctx.spec, ctx.base);
    const std::uint64_t g = static_cast<std::uint64_t>(generation), s = static_cast<std::uint64_t>(slot);
    return run_tasks(d, ctx, models, derive_seed(ctx.master_seed, Purpose::kNoise, {g, s}),
                     derive_seed(ctx.master_seed, Purpose::kRansac, {g, s}), capture);
  } catch (const EvaluationFailed&) {
    throw;
  } catch (const std::exception& e) {
    throw EvaluationFailed(e.what(), static_cast<std::size_t>(genome_id));
  }
}

void train_models(TrainableModels& models, const Capture& capture, Experiment experiment, const TaskSettings& t) {
  if (experiment == Experiment::kStereoDepth) {
    if (capture.refiner.raw.empty()) return;
    for (int i = 0; i < t.refiner_steps; ++i) refiner_train_step(models.refiner, capture.refiner, t.refiner_lr);
  } else {
    if (capture.detector.empty()) return;
    for (int i = 0; i < t.detector_steps; ++i) detector_train_step(models.detector, capture.detector, t.detector_lr);
  }
}

TrainableModels pretrain_models(const EvalContext& ctx, const CameraDesign& design, int frames, int steps) {
  if (!ctx.scene) throw PreconditionError("evaluation context needs a scene");
  TrainableModels models;
  models.detector = DetectorModel(detector_classes(*ctx.scene));
  if (frames <= 0 || steps <= 0) return models;
  EvalContext pre = ctx;
  pre.frames_per_eval = frames;
  Capture capture;
  run_tasks(design, pre, models, derive_seed(ctx.master_seed, Purpose::kPretrain, {0}),
            derive_seed(ctx.master_seed, Purpose::kPretrain, {1}), &capture);
  TaskSettings t = ctx.tasks;
  t.refiner_steps = steps;
  t.detector_steps = steps;
  train_models(models, capture, ctx.experiment, t);
  return models;
}

}  // namespace camforge
