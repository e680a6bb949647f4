// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "camforge/error.hpp"
#include "camforge/optimize.hpp"
#include "camforge/rng.hpp"

using namespace camforge;

namespace {

ParamSpec stereo_spec() {
  ParamSpec s;
  s.params = {{"hfov_deg", ParamKind::kContinuous, 50, 120, 5, {}},
              {"baseline_m", ParamKind::kContinuous, 0.01, 3, 0.2, {}}};
  return s;
}

std::shared_ptr<const SensorCatalog> catalog() {
  static auto c = std::make_shared<const SensorCatalog>(load_catalog(default_catalog_path()));
  return c;
}

ParamSpec mono_spec(SensorScheme scheme) {
  ParamSpec s;
  s.params = {{"pitch_deg", ParamKind::kContinuous, -30, 30, 3, {}},
              {"focal_mm", ParamKind::kContinuous, 1, 20, 3, {}},
              {"n_cameras", ParamKind::kDiscrete, 1, 3, 1, {1, 2, 3}}};
  s.sensor.catalog = catalog();
  s.sensor.scheme = scheme;
  s.sensor.add_range = 3;
  return s;
}

bool on_catalog(const CameraDesign& d) {
  const auto& c = *catalog();
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i].triplet() == std::array<double, 3>{d.sensor_w_mm, d.sensor_h_mm, d.pixel_um}) return true;
  return false;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct StereoFixture {
  SceneInstance scene;
  AgentPath path;
  EvalContext ctx;
  StereoFixture() {
    SceneSpec ss;
    ss.kind = SceneKind::kOutdoorStrip;
    ss.seed = 3;
    scene = generate_scene(ss);
    path = plan_path(scene, 20, 3);
    ctx.experiment = Experiment::kStereoDepth;
    ctx.scene = &scene;
    ctx.path = &path;
    ctx.spec = stereo_spec();
    ctx.base.sensor_w_mm = 1.536;
    ctx.base.sensor_h_mm = 0.768;
    ctx.base.pixel_um = 1.55;
    ctx.base.height_m = 2.0;
    ctx.base.baseline_m = 0.5;
    ctx.tasks.render.max_width = 96;
    ctx.tasks.render.max_height = 48;
    ctx.frames_per_eval = 2;
  }
};

RunOptions small_run(std::uint64_t seed) {
  RunOptions o;
  o.ga.n_generations = 3;
  o.ga.master_seed = seed;
  o.ga.frames_per_eval = 2;
  o.pretrain_frames = 1;
  o.pretrain_steps = 5;
  return o;
}

}  // namespace

TEST(ParamSpecTest, RejectsBadRanges) {
  ParamSpec s = stereo_spec();
  EXPECT_NO_THROW(s.validate());
  s.params[0].lo = 130;
  EXPECT_THROW(s.validate(), ConfigError);
  s = stereo_spec();
  s.params[1].add_range = -1;
  EXPECT_THROW(s.validate(), ConfigError);
  s = stereo_spec();
  s.params.push_back({"zoom", ParamKind::kContinuous, 0, 1, 0, {}});
  EXPECT_THROW(s.validate(), ConfigError);
  s = stereo_spec();
  s.params.push_back({"n_cameras", ParamKind::kDiscrete, 0, 0, 1, {}});
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(GAConfigTest, Validation) {
  GAConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_elites = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GAConfig{};
  c.n_parents = 6;
  EXPECT_THROW(c.validate(), ConfigError);
  c = GAConfig{};
  c.mutate_factor_range = {1.1, 1.2};
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(InitPopulationTest, SeededTwiceIsIdentical) {
  GAConfig c;
  c.master_seed = 42;
  EXPECT_EQ(init_population(stereo_spec(), c), init_population(stereo_spec(), c));
  const auto spec = mono_spec(SensorScheme::kQuantizedContinuous);
  EXPECT_EQ(init_population(spec, c), init_population(spec, c));
  const auto first = init_population(stereo_spec(), c);
  c.master_seed = 43;
  EXPECT_NE(init_population(stereo_spec(), c), first);
}

TEST(InitPopulationTest, BaselineMeanMatchesUniform) {
  GAConfig c;
  c.pop_size = 10000;
  c.master_seed = 7;
  double sum = 0;
  for (const Genome& g : init_population(stereo_spec(), c)) {
    ASSERT_GE(g.values[1], 0.01);
    ASSERT_LE(g.values[1], 3.0);
    sum += g.values[1];
  }
  EXPECT_NEAR(sum / 10000, 1.505, 0.03 * 1.505);
}

TEST(InitPopulationTest, Presets) {
  GAConfig c;
  const auto spec = mono_spec(SensorScheme::kQuantizedContinuous);
  for (const Genome& g : init_population(spec, c, InitPreset::kAllMin)) {
    EXPECT_EQ(g.values, (std::vector<double>{-30, 1, 1}));
    EXPECT_EQ(g.sensor_latent, catalog()->lo());
    EXPECT_TRUE(genome_valid(g, spec));
  }
  for (const Genome& g : init_population(stereo_spec(), c, InitPreset::kAllMax))
    EXPECT_EQ(g.values, (std::vector<double>{120, 3}));
  EXPECT_EQ(init_preset_from_string("all_min"), InitPreset::kAllMin);
  EXPECT_EQ(to_string(InitPreset::kAllMax), "all_max");
  EXPECT_THROW(init_preset_from_string("median"), ConfigError);
}

TEST(InitPopulationTest, EmptyCatalogRejected) {
  ParamSpec s = mono_spec(SensorScheme::kFullyDiscrete);
  s.sensor.catalog = std::make_shared<const SensorCatalog>();
  EXPECT_THROW(init_population(s, GAConfig{}), EmptyCatalog);
}

TEST(MutateTest, IdentityWithoutRanges) {
  ParamSpec spec = mono_spec(SensorScheme::kQuantizedContinuous);
  for (auto& p : spec.params) p.add_range = 0;
  spec.sensor.add_range = 0;
  GAConfig c;
  for (const Genome& g : init_population(spec, c)) EXPECT_EQ(mutate(g, spec, {1, 1}, 9), g);
}

TEST(MutateTest, FovStaysInBoundsAndBand) {
  const ParamSpec spec = stereo_spec();
  Genome g{{60, 1.0}};
  for (std::uint64_t s = 0; s < 100000; ++s) {
    const double fov = mutate(g, spec, {0.8, 1.2}, s).values[0];
    ASSERT_GE(fov, 50.0);
    ASSERT_LE(fov, 120.0);
    ASSERT_GE(fov, 60 * 0.8 - 5);
    ASSERT_LE(fov, 60 * 1.2 + 5);
  }
}

TEST(MutateTest, ClampsAtBounds) {
  const ParamSpec spec = stereo_spec();
  int at_lo = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    const Genome m = mutate(Genome{{50, 0.01}}, spec, {0.8, 1.2}, s);
    EXPECT_TRUE(genome_valid(m, spec));
    at_lo += m.values[0] == 50.0;
  }
  EXPECT_GT(at_lo, 0);
}

TEST(MutateTest, DiscreteStaysInList) {
  const ParamSpec spec = mono_spec(SensorScheme::kFullyDiscrete);
  Genome g = init_population(spec, GAConfig{}).front();
  for (std::uint64_t s = 0; s < 5000; ++s) {
    g = mutate(g, spec, {0.8, 1.2}, s);
    const double n = g.values[2];
    ASSERT_TRUE(n == 1 || n == 2 || n == 3);
  }
}

TEST(MutateTest, FullyDiscreteSensorAlwaysOnCatalog) {
  const ParamSpec spec = mono_spec(SensorScheme::kFullyDiscrete);
  Genome g = init_population(spec, GAConfig{}).front();
  std::vector<int> seen(catalog()->size(), 0);
  for (std::uint64_t s = 0; s < 5000; ++s) {
    g = mutate(g, spec, {0.8, 1.2}, s);
    ASSERT_TRUE(genome_valid(g, spec));
    ASSERT_EQ(g.sensor_latent, (*catalog())[static_cast<std::size_t>(g.sensor_index)].triplet());
    ++seen[static_cast<std::size_t>(g.sensor_index)];
  }
  EXPECT_GT(std::count_if(seen.begin(), seen.end(), [](int v) { return v > 0; }), 10);
}

TEST(MutateTest, QuantizedLatentOffCatalogButEvaluatedOnCatalog) {
  const ParamSpec spec = mono_spec(SensorScheme::kQuantizedContinuous);
  Genome g = init_population(spec, GAConfig{}).front();
  int off = 0;
  for (std::uint64_t s = 0; s < 500; ++s) {
    g = mutate(g, spec, {0.8, 1.2}, s);
    ASSERT_TRUE(genome_valid(g, spec));
    const auto& e = (*catalog())[static_cast<std::size_t>(g.sensor_index)];
    ASSERT_EQ(static_cast<std::size_t>(g.sensor_index),
              snap_index(*catalog(), g.sensor_latent[0], g.sensor_latent[1], g.sensor_latent[2]));
    off += g.sensor_latent != e.triplet();
    ASSERT_TRUE(on_catalog(decode(g, spec, CameraDesign{})));
  }
  EXPECT_GT(off, 0);
}

TEST(CrossoverTest, IdenticalParents) {
  const auto pop = init_population(mono_spec(SensorScheme::kQuantizedContinuous), GAConfig{});
  const std::vector<Genome> parents{pop[0], pop[0], pop[0]};
  EXPECT_EQ(crossover_uniform(parents, 5), pop[0]);
}

TEST(CrossoverTest, GenesComeEvenlyFromParents) {
  const Genome a{{50, 0.01}}, b{{120, 3}};
  const std::vector<Genome> parents{a, b};
  int from_a[2] = {0, 0};
  for (std::uint64_t s = 0; s < 10000; ++s) {
    const Genome c = crossover_uniform(parents, s);
    for (int i = 0; i < 2; ++i) {
      ASSERT_TRUE(c.values[i] == a.values[i] || c.values[i] == b.values[i]);
      from_a[i] += c.values[i] == a.values[i];
    }
  }
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(from_a[i] / 10000.0, 0.5, 0.03 * 0.5);
}

TEST(CrossoverTest, SensorGeneTravelsWhole) {
  const auto spec = mono_spec(SensorScheme::kQuantizedContinuous);
  GAConfig c;
  c.master_seed = 11;
  const auto pop = init_population(spec, c);
  const std::vector<Genome> parents(pop.begin(), pop.begin() + 3);
  for (std::uint64_t s = 0; s < 300; ++s) {
    const Genome child = crossover_uniform(parents, s);
    const bool match = std::any_of(parents.begin(), parents.end(), [&](const Genome& p) {
      return p.sensor_latent == child.sensor_latent && p.sensor_index == child.sensor_index;
    });
    ASSERT_TRUE(match);
    ASSERT_TRUE(genome_valid(child, spec));
  }
  EXPECT_THROW(crossover_uniform(std::span<const Genome>(parents.data(), 1), 1), PreconditionError);
}

TEST(DecodeTest, FovBecomesFocalForSensorWidth) {
  const ParamSpec spec = stereo_spec();
  CameraDesign base;
  base.sensor_w_mm = 1.536;
  const CameraDesign d = decode(Genome{{50, 0.7}}, spec, base);
  EXPECT_NEAR(hfov_deg(d), 50.0, 1e-9);
  EXPECT_DOUBLE_EQ(d.baseline_m, 0.7);
  EXPECT_NEAR(d.focal_mm, 0.768 / std::tan(25.0 * M_PI / 180.0), 1e-12);
}

TEST(FitnessTest, Stereo) {
  DepthMetrics m;
  m.avg_log_error = 0.5;
  EXPECT_NEAR(fitness_stereo(m), 2.0, 1e-5);
  m.avg_log_error = 0.0;
  EXPECT_DOUBLE_EQ(fitness_stereo(m), 1.0 / kFitnessEpsilon);
  double prev = fitness_stereo(m);
  for (double e : {0.01, 0.1, 0.3, 1.0, 4.0}) {
    m.avg_log_error = e;
    EXPECT_LT(fitness_stereo(m), prev);
    prev = fitness_stereo(m);
  }
  m.avg_log_error = -0.1;
  EXPECT_THROW(fitness_stereo(m), PreconditionError);
}

TEST(FitnessTest, MonoComposition) {
  EXPECT_EQ(fitness_mono(0, 0, 0, 0), 0.0);
  EXPECT_EQ(fitness_mono(200, 0.12, 0.5, 1.0), 2.06);
  MonoWeights w;
  const double base = fitness_mono(37, 0.4, 0.3, 0.5, w);
  w.od = 2.0;
  EXPECT_NEAR(fitness_mono(37, 0.4, 0.3, 0.5, w) - base, 0.3, 1e-15);
  MatchResult m{24, 200};
  ObstacleReport o{1, 1};
  EXPECT_EQ(fitness_mono(m, 0.5, o), fitness_mono(24, 0.12, 0.5, 1.0));
}

TEST(StepGenerationTest, PureElitismKeepsPopulation) {
  const ParamSpec spec = stereo_spec();
  GAConfig c;
  GAState st;
  for (const Genome& g : init_population(spec, c)) {
    Individual ind{st.next_id++, g, FitnessReport{}};
    ind.report->fitness = ind.id * 0.5;
    st.population.push_back(ind);
  }
  c.n_elites = c.pop_size;
  const GAState next = step_generation(st, spec, c);
  ASSERT_EQ(next.population.size(), st.population.size());
  EXPECT_EQ(next.generation, 1);
  for (const Individual& a : st.population) {
    const bool kept = std::any_of(next.population.begin(), next.population.end(),
                                  [&](const Individual& b) { return b.id == a.id && b.genome == a.genome; });
    EXPECT_TRUE(kept);
  }
}

TEST(StepGenerationTest, FiveTwoThreeMakesThreeOffspring) {
  const ParamSpec spec = stereo_spec();
  GAConfig c;
  GAState st;
  const double fit[] = {1.0, 3.0, 2.0, 3.0, 0.5};
  for (const Genome& g : init_population(spec, c)) {
    Individual ind{st.next_id++, g, FitnessReport{}};
    ind.report->fitness = fit[ind.id];
    st.population.push_back(ind);
  }
  const GAState next = step_generation(st, spec, c);
  ASSERT_EQ(next.population.size(), 5u);
  // Ties keep slot order: slot 1 before slot 3.
  EXPECT_EQ(next.population[0].id, 1);
  EXPECT_EQ(next.population[1].id, 3);
  EXPECT_TRUE(next.population[0].report && next.population[1].report);
  for (int i = 2; i < 5; ++i) {
    EXPECT_EQ(next.population[i].id, 5 + i - 2);
    EXPECT_FALSE(next.population[i].report);
    EXPECT_TRUE(genome_valid(next.population[i].genome, spec));
  }
  EXPECT_EQ(next.next_id, 8);
  st.population[0].report.reset();
  EXPECT_THROW(step_generation(st, spec, c), PreconditionError);
}

TEST(CaptureStepsTest, EvenlySpaced) {
  AgentPath p;
  p.steps.resize(10);
  EXPECT_EQ(capture_steps(p, 2, Experiment::kStereoDepth), (std::vector<std::size_t>{2, 7}));
  EXPECT_EQ(capture_steps(p, 3, Experiment::kMonoMr), (std::vector<std::size_t>{1, 4, 7}));
  EXPECT_EQ(capture_steps(p, 50, Experiment::kMonoMr).size(), 9u);
  EXPECT_THROW(capture_steps(AgentPath{}, 2, Experiment::kStereoDepth), PreconditionError);
}

TEST(EvaluateTest, DeterministicAndRecomputable) {
  StereoFixture fx;
  const Genome g{{70, 0.8}};
  TrainableModels m;
  Capture cap;
  const FitnessReport a = evaluate(g, fx.ctx, m, 2, 1, 7, &cap);
  const FitnessReport b = evaluate(g, fx.ctx, m, 2, 1, 7);
  EXPECT_EQ(a.fitness, b.fitness);
  EXPECT_EQ(a.depth.avg_log_error, b.depth.avg_log_error);
  EXPECT_EQ(a.fitness, fitness_stereo(a.depth));
  EXPECT_EQ(a.frames, 4);
  EXPECT_GT(a.depth.count, 0u);
  EXPECT_FALSE(cap.refiner.raw.empty());
  // Another slot draws different noise.
  EXPECT_NE(evaluate(g, fx.ctx, m, 2, 2, 7).fitness, a.fitness);
}

TEST(EvaluateTest, NoiselessMonoRecomputable) {
  SceneSpec ss;
  ss.seed = 2;
  const SceneInstance scene = generate_scene(ss);
  const AgentPath path = plan_path(scene, 12, 2);
  EvalContext ctx;
  ctx.experiment = Experiment::kMonoMr;
  ctx.scene = &scene;
  ctx.path = &path;
  ctx.spec = mono_spec(SensorScheme::kQuantizedContinuous);
  ctx.noise = noiseless_model();
  ctx.tasks.render.scale = 0.05;
  ctx.frames_per_eval = 2;
  const TrainableModels m = pretrain_models(ctx, ctx.base, 1, 3);
  const Genome g = init_population(ctx.spec, GAConfig{}).front();
  const FitnessReport r = evaluate(g, ctx, m, 0, 0, 0);
  EXPECT_EQ(r.fitness, fitness_mono(r.mean_inliers, r.match.inlier_ratio(), r.ap, r.obstacles.ratio(), ctx.weights));
  EXPECT_TRUE(std::isfinite(r.fitness));
  EXPECT_EQ(evaluate(g, ctx, m, 0, 0, 0).fitness, r.fitness);
}

TEST(EvaluateTest, FailureNamesGenome) {
  StereoFixture fx;
  fx.ctx.path = nullptr;
  try {
    evaluate(Genome{{70, 0.8}}, fx.ctx, TrainableModels{}, 0, 0, 12);
    FAIL() << "expected EvaluationFailed";
  } catch (const EvaluationFailed& e) {
    EXPECT_EQ(e.genome_id(), 12u);
  }
}

TEST(RunJointTest, DeterministicAcrossWorkerCounts) {
  StereoFixture fx;
  RunOptions o = small_run(5);
  const auto dir = std::filesystem::temp_directory_path();
  o.workers = 1;
  const RunResult a = run_joint(fx.ctx, o);
  write_history_csv(dir / "camforge_hist_w1.csv", a, fx.ctx);
  o.workers = 8;
  const RunResult b = run_joint(fx.ctx, o);
  write_history_csv(dir / "camforge_hist_w8.csv", b, fx.ctx);
  ASSERT_FALSE(a.failed);
  EXPECT_EQ(slurp(dir / "camforge_hist_w1.csv"), slurp(dir / "camforge_hist_w8.csv"));
  EXPECT_EQ(a.models, b.models);
}

TEST(RunJointTest, ElitismBoundsAndIds) {
  StereoFixture fx;
  const RunResult r = run_joint(fx.ctx, small_run(8));
  ASSERT_FALSE(r.failed);
  ASSERT_EQ(r.best_per_generation.size(), 3u);
  for (std::size_t i = 1; i < r.best_per_generation.size(); ++i)
    EXPECT_GE(r.best_per_generation[i], r.best_per_generation[i - 1]);
  EXPECT_EQ(r.history.size(), 15u);
  for (const HistoryRow& row : r.history) EXPECT_TRUE(genome_valid(row.genome, fx.ctx.spec));
  // Elites carry over without a fresh evaluation.
  int carried = 0;
  for (const HistoryRow& row : r.history) carried += !row.evaluated;
  EXPECT_EQ(carried, 4);
  EXPECT_EQ(r.best.report->fitness, r.best_per_generation.back());
}

TEST(RunJointTest, QuantizedClosureInHistory) {
  SceneSpec ss;
  ss.seed = 4;
  const SceneInstance scene = generate_scene(ss);
  const AgentPath path = plan_path(scene, 12, 4);
  for (SensorScheme scheme : {SensorScheme::kQuantizedContinuous, SensorScheme::kFullyDiscrete}) {
    EvalContext ctx;
    ctx.experiment = Experiment::kMonoMr;
    ctx.scene = &scene;
    ctx.path = &path;
    ctx.spec = mono_spec(scheme);
    ctx.tasks.render.scale = 0.03;
    RunOptions o = small_run(3);
    o.ga.frames_per_eval = 1;
    const RunResult r = run_joint(ctx, o);
    ASSERT_FALSE(r.failed) << r.failure;
    int off = 0;
    for (const HistoryRow& row : r.history) {
      EXPECT_TRUE(on_catalog(decode(row.genome, ctx.spec, ctx.base)));
      off += row.genome.sensor_latent != (*catalog())[static_cast<std::size_t>(row.genome.sensor_index)].triplet();
    }
    if (scheme == SensorScheme::kFullyDiscrete)
      EXPECT_EQ(off, 0);
    else
      EXPECT_GT(off, 0);
  }
}

TEST(RunJointTest, FrozenMatchesJointWithoutTrainableSteps) {
  StereoFixture fx;
  fx.ctx.tasks.refiner_steps = 0;
  RunOptions o = small_run(2);
  const RunResult joint = run_joint(fx.ctx, o);
  o.frozen = true;
  const RunResult frozen = run_joint(fx.ctx, o);
  ASSERT_EQ(joint.history.size(), frozen.history.size());
  for (std::size_t i = 0; i < joint.history.size(); ++i)
    EXPECT_EQ(joint.history[i].report.fitness, frozen.history[i].report.fitness);
  EXPECT_EQ(joint.models, frozen.models);
}

TEST(RunJointTest, FailureStopsWithPartialHistory) {
  StereoFixture fx;
  // A path of one step cannot serve the requested frames.
  AgentPath empty;
  fx.ctx.path = &empty;
  RunOptions o = small_run(1);
  o.pretrain_steps = 0;
  const RunResult r = run_joint(fx.ctx, o);
  EXPECT_TRUE(r.failed);
  EXPECT_TRUE(r.history.empty());
  EXPECT_NE(r.failure.find("genome"), std::string::npos);
}

TEST(PersistenceTest, GenomeAndRefinerRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path();
  const ParamSpec spec = mono_spec(SensorScheme::kQuantizedContinuous);
  EvalContext ctx;
  ctx.spec = spec;
  ctx.experiment = Experiment::kMonoMr;
  Individual best{4, init_population(spec, GAConfig{}).back(), FitnessReport{}};
  write_best_genome(dir / "camforge_best.ini", best, ctx);
  EXPECT_EQ(read_genome(dir / "camforge_best.ini", spec), best.genome);
  EXPECT_THROW(read_genome(dir / "camforge_missing.ini", spec), ConfigError);

  const DisparityRefiner r{0.9731, -0.0125};
  save_refiner(r, dir / "camforge_refiner.ini");
  const DisparityRefiner back = load_refiner(dir / "camforge_refiner.ini");
  EXPECT_EQ(back.alpha, r.alpha);
  EXPECT_EQ(back.beta, r.beta);
}
