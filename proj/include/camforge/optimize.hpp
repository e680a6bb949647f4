// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camforge/camera.hpp"
#include "camforge/catalog.hpp"
#include "camforge/noise.hpp"
#include "camforge/scene.hpp"
#include "camforge/tasks/detector.hpp"
#include "camforge/tasks/features.hpp"
#include "camforge/tasks/obstacles.hpp"
#include "camforge/tasks/stereo.hpp"

namespace camforge {

// ---------------------------------------------------------------------------
// Design space

enum class ParamKind { kContinuous, kDiscrete };

/// One scalar camera parameter. Recognized names: hfov_deg, baseline_m,
/// pitch_deg, focal_mm, height_m, exposure_ms, gain_db, n_cameras.
struct ParamDef {
  std::string name;
  ParamKind kind = ParamKind::kContinuous;
  double lo = 0.0;
  double hi = 1.0;
  double add_range = 0.0;
  std::vector<double> values;  // kDiscrete only, ascending
  friend bool operator==(const ParamDef&, const ParamDef&) = default;
};

enum class SensorScheme { kFullyDiscrete, kQuantizedContinuous };

std::string to_string(SensorScheme scheme);
SensorScheme sensor_scheme_from_string(const std::string& s);

/// Categorical sensor (w, h, p) drawn from a catalog.
struct SensorParam {
  std::shared_ptr<const SensorCatalog> catalog;  // null: sensor not optimized
  SensorScheme scheme = SensorScheme::kQuantizedContinuous;
  double add_range = 0.0;   // applied to each latent component (mm, mm, um)
  bool normalized = false;  // distance used by snapping
};

struct ParamSpec {
  std::vector<ParamDef> params;
  SensorParam sensor;
  bool has_sensor() const noexcept { return sensor.catalog != nullptr; }
  /// Throws ConfigError on empty lists, lo >= hi, negative ranges, unknown names.
  void validate() const;
};

struct Genome {
  std::vector<double> values;             // parallel to ParamSpec::params
  std::array<double, 3> sensor_latent{};  // continuous (w, h, p) under the quantized scheme
  int sensor_index = -1;                  // catalog entry actually evaluated
  friend bool operator==(const Genome&, const Genome&) = default;
};

/// Bounds, list membership and catalog membership of the evaluated sensor.
bool genome_valid(const Genome& genome, const ParamSpec& spec);

/// Applies the genome on top of `base`. hfov_deg is turned into a focal
/// length for the genome's sensor width.
CameraDesign decode(const Genome& genome, const ParamSpec& spec, const CameraDesign& base);

struct GAConfig {
  int pop_size = 5;
  int n_elites = 2;
  int n_parents = 3;
  int n_generations = 10;
  std::array<double, 2> mutate_factor_range{0.8, 1.2};
  std::uint64_t master_seed = 1;
  int frames_per_eval = 4;
  /// Throws ConfigError unless n_elites < n_parents <= pop_size and the
  /// factor range contains 1.
  void validate() const;
  friend bool operator==(const GAConfig&, const GAConfig&) = default;
};

enum class InitPreset { kRandom, kAllMin, kAllMax };

std::string to_string(InitPreset preset);
InitPreset init_preset_from_string(const std::string& s);

std::vector<Genome> init_population(const ParamSpec& spec, const GAConfig& config,
                                    InitPreset preset = InitPreset::kRandom);

/// x' = clamp(x u + a) with u ~ U(factor range), a ~ U(-add, add). Discrete
/// parameters move to the list value nearest that proposal. Under the
/// fully-discrete scheme the sensor steps to a random catalog neighbour
/// (by index distance up to ceil(add_range)); under the quantized scheme the
/// latent triplet mutates like continuous values and is snapped.
Genome mutate(const Genome& genome, const ParamSpec& spec, std::array<double, 2> factor_range, std::uint64_t seed);

/// Each gene (the sensor counting as one) comes from a uniformly chosen parent.
Genome crossover_uniform(std::span<const Genome> parents, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Fitness

inline constexpr double kFitnessEpsilon = 1e-6;

double fitness_stereo(const DepthMetrics& metrics);

struct MonoWeights {
  double feature = 1.0;
  double inlier = 0.0025;
  double ratio = 0.5;
  double od = 1.0;
  double obstacle = 1.0;
  friend bool operator==(const MonoWeights&, const MonoWeights&) = default;
};

double fitness_mono(double n_inlier, double inlier_ratio, double ap, double obstacle_ratio,
                    const MonoWeights& weights = {});
double fitness_mono(const MatchResult& match, double ap, const ObstacleReport& obstacles,
                    const MonoWeights& weights = {});

// ---------------------------------------------------------------------------
// Evaluation

enum class Experiment { kStereoDepth, kMonoMr };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);

/// Which pixels enter the stereo depth metrics.
enum class StereoMask {
  kFiniteDepth,  // every left pixel with a finite ground-truth depth
  kGtValid,      // only pixels seen by both cameras with d < d_max
};

struct TaskSettings {
  RenderOptions render;
  NoiseSampler sampler = NoiseSampler::kGaussian;
  // stereo
  int block_window = 5;
  double d_max_native = 192.0;
  StereoMask stereo_mask = StereoMask::kFiniteDepth;
  double refiner_lr = 0.5;
  int refiner_steps = 20;
  // features
  int max_features = 2000;
  double ratio_test = 0.8;
  int ransac_iterations = 500;
  double inlier_px = 2.0;
  // obstacles
  int obstacle_min_px = kDefaultObstacleMinPx;
  // detector
  double detector_lr = 2.0;
  int detector_steps = 20;
  InferenceOptions inference{0.0, 0.3, 20};  // AP ranks every surviving window
  int gt_min_px = 30;
  friend bool operator==(const TaskSettings&, const TaskSettings&) = default;
};

/// Trainable task heads shared by all genomes of a run.
struct TrainableModels {
  DisparityRefiner refiner;
  DetectorModel detector;
  friend bool operator==(const TrainableModels&, const TrainableModels&) = default;
};

/// Gradient-step material gathered while evaluating one genome.
struct Capture {
  RefinerSample refiner;
  DetectorBatch detector;
};

struct FitnessReport {
  double fitness = 0.0;
  DepthMetrics depth;       // stereo
  double mean_inliers = 0;  // mono, per frame pair
  MatchResult match;        // mono, summed over frame pairs
  double ap = 0.0;
  ObstacleReport obstacles;
  int frames = 0;
};

/// Everything an evaluation reads besides the genome.
struct EvalContext {
  Experiment experiment = Experiment::kStereoDepth;
  const SceneInstance* scene = nullptr;
  const AgentPath* path = nullptr;
  ParamSpec spec;
  CameraDesign base;
  NoiseModel noise;
  TaskSettings tasks;
  MonoWeights weights;
  std::uint64_t master_seed = 1;
  int frames_per_eval = 4;
};

/// Path steps whose frames are captured (evenly spaced; mono also renders
/// the following step for feature matching).
std::vector<std::size_t> capture_steps(const AgentPath& path, int frames, Experiment experiment);

/// Renders, adds noise, runs the experiment's tasks and composes F. Reads
/// only `models`. Throws EvaluationFailed naming `genome_id`.
FitnessReport evaluate(const Genome& genome, const EvalContext& ctx, const TrainableModels& models, int generation,
                       int slot, int genome_id, Capture* capture = nullptr);

/// Applies the configured gradient steps for one capture.
void train_models(TrainableModels& models, const Capture& capture, Experiment experiment,
                  const TaskSettings& tasks);

/// Fits the heads on frames from `design` before the search starts.
TrainableModels pretrain_models(const EvalContext& ctx, const CameraDesign& design, int frames, int steps);

// ---------------------------------------------------------------------------
// Genetic algorithm

struct Individual {
  int id = 0;  // unique within a run, assigned at birth
  Genome genome;
  std::optional<FitnessReport> report;
};

struct GAState {
  int generation = 0;
  int next_id = 0;
  std::vector<Individual> population;
};

/// Sorts by fitness (descending, ties by slot), keeps the elites unchanged
/// and fills the remaining slots with mutated crossovers of the top parents.
GAState step_generation(const GAState& state, const ParamSpec& spec, const GAConfig& config);

struct RunOptions {
  GAConfig ga;
  InitPreset preset = InitPreset::kRandom;
  bool frozen = false;  // skip gradient steps during the search
  int workers = 1;
  int pretrain_frames = 4;
  int pretrain_steps = 200;
  std::optional<CameraDesign> pretrain_design;  // default: ctx.base
};

struct HistoryRow {
  int generation = 0;
  int slot = 0;
  int genome_id = 0;
  bool evaluated = false;
  Genome genome;
  FitnessReport report;
};

struct RunResult {
  Individual best;
  std::vector<HistoryRow> history;
  std::vector<double> best_per_generation;
  TrainableModels models;
  bool failed = false;
  std::string failure;
};

/// Called after each generation's rows are final (for partial persistence).
using GenerationCallback = std::function<void(const RunResult&)>;

/// Joint loop: per generation snapshot the models, evaluate new genomes in
/// parallel against the snapshot, apply gradient steps in slot order (unless
/// frozen), then breed. Stops with failed = true on EvaluationFailed.
RunResult run_joint(const EvalContext& ctx, const RunOptions& options, const GenerationCallback& on_generation = {});

void write_history_csv(const std::filesystem::path& path, const RunResult& result, const EvalContext& ctx);

/// Key-value text with the genome, its decoded design and its metrics.
void write_best_genome(const std::filesystem::path& path, const Individual& best, const EvalContext& ctx);
Genome read_genome(const std::filesystem::path& path, const ParamSpec& spec);

void save_refiner(const DisparityRefiner& model, const std::filesystem::path& path);
DisparityRefiner load_refiner(const std::filesystem::path& path);

}  // namespace camforge
