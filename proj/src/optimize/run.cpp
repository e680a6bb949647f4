// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "../text_io.hpp"
#include "camforge/error.hpp"
#include "camforge/optimize.hpp"

namespace camforge {

namespace {

struct SlotOutcome {
  FitnessReport report;
  Capture capture;
  std::exception_ptr error;
};

// Evaluates the listed slots with `workers` threads pulling from a shared index.
void evaluate_slots(const std::vector<std::size_t>& slots, const GAState& state, const EvalContext& ctx,
                    const TrainableModels& snapshot, bool want_capture, int workers,
                    std::vector<SlotOutcome>& out) {
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < slots.size(); i = next++) {
      const std::size_t slot = slots[i];
      const Individual& ind = state.population[slot];
      SlotOutcome& o = out[slot];
      try {
        o.report = evaluate(ind.genome, ctx, snapshot, state.generation, static_cast<int>(slot), ind.id,
                            want_capture ? &o.capture : nullptr);
      } catch (...) {
        o.error = std::current_exception();
      }
    }
  };
  const int n = std::clamp<int>(workers, 1, static_cast<int>(std::max<std::size_t>(slots.size(), 1)));
  if (n == 1) {
    work();
    return;
  }
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(work);
  for (auto& t : pool) t.join();
}

std::string sensor_id(const EvalContext& ctx, const Genome& g) {
  if (!ctx.spec.has_sensor() || g.sensor_index < 0) return "";
  return (*ctx.spec.sensor.catalog)[static_cast<std::size_t>(g.sensor_index)].id;
}

std::string g17(double x) { return fmt::format("{:.17g}", x); }

}  // namespace

RunResult run_joint(const EvalContext& ctx, const RunOptions& options, const GenerationCallback& on_generation) {
  options.ga.validate();
  ctx.spec.validate();
  EvalContext c = ctx;
  c.master_seed = options.ga.master_seed;
  c.frames_per_eval = options.ga.frames_per_eval;

  RunResult result;
  result.models = pretrain_models(c, options.pretrain_design.value_or(c.base), options.pretrain_frames,
                                  options.pretrain_steps);

  GAState state;
  for (Genome& g : init_population(c.spec, options.ga, options.preset)) {
    Individual ind;
    ind.id = state.next_id++;
    ind.genome = std::move(g);
    state.population.push_back(std::move(ind));
  }

  for (int gen = 0; gen < options.ga.n_generations; ++gen) {
    state.generation = gen;
    const TrainableModels snapshot = result.models;
    std::vector<std::size_t> pending;
    for (std::size_t s = 0; s < state.population.size(); ++s)
      if (!state.population[s].report) pending.push_back(s);

    std::vector<SlotOutcome> outcomes(state.population.size());
    evaluate_slots(pending, state, c, snapshot, !options.frozen, options.workers, outcomes);

    for (std::size_t s : pending) {
      if (!outcomes[s].error) continue;
      try {
        std::rethrow_exception(outcomes[s].error);
      } catch (const EvaluationFailed& e) {
        result.failed = true;
        result.failure = e.what();
      } catch (const std::exception& e) {
        result.failed = true;
        result.failure = EvaluationFailed(e.what(), static_cast<std::size_t>(state.population[s].id)).what();
      }
      spdlog::error("generation {}: {}", gen, result.failure);
      return result;
    }

    for (std::size_t s = 0; s < state.population.size(); ++s) {
      Individual& ind = state.population[s];
      const bool evaluated = !ind.report.has_value();
      if (evaluated) ind.report = outcomes[s].report;
      if (!options.frozen && evaluated) train_models(result.models, outcomes[s].capture, c.experiment, c.tasks);
      result.history.push_back({gen, static_cast<int>(s), ind.id, evaluated, ind.genome, *ind.report});
    }

    const auto best = std::max_element(
        state.population.begin(), state.population.end(),
        [](const Individual& a, const Individual& b) { return a.report->fitness < b.report->fitness; });
    result.best = *best;
    result.best_per_generation.push_back(best->report->fitness);
    spdlog::info("generation {}: best F = {:.6g} (genome {})", gen, best->report->fitness, best->id);
    if (on_generation) on_generation(result);

    if (gen + 1 < options.ga.n_generations) state = step_generation(state, c.spec, options.ga);
  }
  return result;
}

void write_history_csv(const std::filesystem::path& path, const RunResult& result, const EvalContext& ctx) {
  auto os = detail::open_for_write(path);
  os << "generation,slot,genome_id,evaluated,fitness,avg_log_error,rmse_m,depth_pixels,mean_inliers,n_inlier,"
        "n_total,inlier_ratio,ap,o_seen,o_total,frames";
  for (const ParamDef& p : ctx.spec.params) os << ',' << p.name;
  if (ctx.spec.has_sensor())
    os << ",sensor_id,sensor_w_mm,sensor_h_mm,pixel_um,latent_w_mm,latent_h_mm,latent_pixel_um";
  os << '\n';
  for (const HistoryRow& row : result.history) {
    const FitnessReport& r = row.report;
    os << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", row.generation, row.slot, row.genome_id,
                      row.evaluated ? 1 : 0, g17(r.fitness), g17(r.depth.avg_log_error), g17(r.depth.rmse_m),
                      r.depth.count, g17(r.mean_inliers), r.match.n_inlier, r.match.n_total,
                      g17(r.match.inlier_ratio()), g17(r.ap), r.obstacles.o_seen, r.obstacles.o_total, r.frames);
    for (double v : row.genome.values) os << ',' << g17(v);
    if (ctx.spec.has_sensor()) {
      const SensorEntry& e = (*ctx.spec.sensor.catalog)[static_cast<std::size_t>(row.genome.sensor_index)];
      os << ',' << e.id << ',' << g17(e.sensor_w_mm) << ',' << g17(e.sensor_h_mm) << ',' << g17(e.pixel_um);
      for (double v : row.genome.sensor_latent) os << ',' << g17(v);
    }
    os << '\n';
  }
}

void write_best_genome(const std::filesystem::path& path, const Individual& best, const EvalContext& ctx) {
  auto os = detail::open_for_write(path);
  os << "[genome]\n";
  os << "genome_id = " << best.id << '\n';
  for (std::size_t i = 0; i < ctx.spec.params.size(); ++i)
    os << ctx.spec.params[i].name << " = " << g17(best.genome.values[i]) << '\n';
  if (ctx.spec.has_sensor()) {
    os << "sensor_id = " << sensor_id(ctx, best.genome) << '\n';
    os << "sensor_index = " << best.genome.sensor_index << '\n';
    os << "latent_w_mm = " << g17(best.genome.sensor_latent[0]) << '\n';
    os << "latent_h_mm = " << g17(best.genome.sensor_latent[1]) << '\n';
    os << "latent_pixel_um = " << g17(best.genome.sensor_latent[2]) << '\n';
  }
  const CameraDesign d = decode(best.genome, ctx.spec, ctx.base);
  os << "\n[design]\n";
  os << "pitch_deg = " << g17(d.pitch_deg) << '\n';
  os << "height_m = " << g17(d.height_m) << '\n';
  os << "focal_mm = " << g17(d.focal_mm) << '\n';
  os << "hfov_deg = " << g17(hfov_deg(d)) << '\n';
  os << "sensor_w_mm = " << g17(d.sensor_w_mm) << '\n';
  os << "sensor_h_mm = " << g17(d.sensor_h_mm) << '\n';
  os << "pixel_um = " << g17(d.pixel_um) << '\n';
  os << "exposure_ms = " << g17(d.exposure_ms) << '\n';
  os << "gain_db = " << g17(d.gain_db) << '\n';
  os << "baseline_m = " << g17(d.baseline_m) << '\n';
  os << "n_cameras = " << d.n_cameras << '\n';
  if (best.report) {
    const FitnessReport& r = *best.report;
    os << "\n[metrics]\n";
    os << "fitness = " << g17(r.fitness) << '\n';
    if (ctx.experiment == Experiment::kStereoDepth) {
      os << "avg_log_error = " << g17(r.depth.avg_log_error) << '\n';
      os << "rmse_m = " << g17(r.depth.rmse_m) << '\n';
    } else {
      os << "mean_inliers = " << g17(r.mean_inliers) << '\n';
      os << "inlier_ratio = " << g17(r.match.inlier_ratio()) << '\n';
      os << "ap = " << g17(r.ap) << '\n';
      os << "o_seen = " << r.obstacles.o_seen << '\n';
      os << "o_total = " << r.obstacles.o_total << '\n';
    }
  }
}

Genome read_genome(const std::filesystem::path& path, const ParamSpec& spec) {
  if (!std::filesystem::exists(path)) throw ConfigError("genome file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
    Genome g;
    for (const ParamDef& p : spec.params) g.values.push_back(tree.get<double>("genome." + p.name));
    if (spec.has_sensor()) {
      const SensorCatalog& cat = *spec.sensor.catalog;
      if (auto id = tree.get_optional<std::string>("genome.sensor_id")) {
        const std::size_t idx = cat.find(*id);
        if (idx == cat.size()) throw ConfigError("sensor '" + *id + "' is not in the catalog");
        g.sensor_index = static_cast<int>(idx);
      } else {
        g.sensor_index = tree.get<int>("genome.sensor_index");
      }
      if (g.sensor_index < 0 || static_cast<std::size_t>(g.sensor_index) >= cat.size())
        throw ConfigError("sensor index out of range in " + path.string());
      g.sensor_latent = cat[static_cast<std::size_t>(g.sensor_index)].triplet();
      g.sensor_latent[0] = tree.get<double>("genome.latent_w_mm", g.sensor_latent[0]);
      g.sensor_latent[1] = tree.get<double>("genome.latent_h_mm", g.sensor_latent[1]);
      g.sensor_latent[2] = tree.get<double>("genome.latent_pixel_um", g.sensor_latent[2]);
    }
    return g;
  } catch (const boost::property_tree::ptree_error& e) {
    throw ConfigError("bad genome file " + path.string() + ": " + e.what());
  }
}

void save_refiner(const DisparityRefiner& model, const std::filesystem::path& path) {
  auto os = detail::open_for_write(path);
  os << "alpha = " << g17(model.alpha) << '\n';
  os << "beta = " << g17(model.beta) << '\n';
}

DisparityRefiner load_refiner(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("refiner file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
    return DisparityRefiner{tree.get<double>("alpha"), tree.get<double>("beta")};
  } catch (const boost::property_tree::ptree_error& e) {
    throw ConfigError("bad refiner file " + path.string() + ": " + e.what());
  }
}

}  // namespace camforge
