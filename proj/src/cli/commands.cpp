// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "../text_io.hpp"
#include "camforge/config.hpp"
#include "camforge/error.hpp"
#include "camforge/validation.hpp"
#include "svg.hpp"

namespace camforge {

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void setup_logging() {
  static bool done = false;
  if (!done) {
    spdlog::set_default_logger(std::make_shared<spdlog::logger>("camforge", std::make_shared<spdlog::sinks::stderr_sink_mt>()));
    done = true;
  }
  const char* env = std::getenv("CAMFORGE_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

void write_text(const fs::path& path, const std::string& body) { detail::open_for_write(path) << body; }

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  bool frozen = false;
  std::string scheme;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "experiment INI file")->required();
  cmd->add_option("--seed", o.seed, "master seed override");
  cmd->add_option("--workers", o.workers, "evaluation threads");
  cmd->add_option("--out", o.out, "output directory");
}

ExperimentConfig resolve_config(const Overrides& o) {
  ExperimentConfig c = load_config(o.config);
  if (o.seed) c.ga.master_seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (!o.out.empty()) c.out_dir = fs::absolute(o.out).lexically_normal();
  if (o.frozen) c.frozen = true;
  if (!o.scheme.empty()) {
    if (!c.sensor_enabled) throw ConfigError("--scheme needs a config with [sensor] enabled = true");
    c.scheme = sensor_scheme_from_string(o.scheme);
  }
  validate(c);
  return c;
}

std::string fitness_svg(const RunResult& r) {
  svg::Chart chart;
  chart.title = "Best fitness per generation";
  chart.x_label = "generation";
  chart.y_label = "fitness F";
  svg::Series all{"evaluated", "#9aa5b1", {}, {}, false, true};
  for (const HistoryRow& row : r.history)
    if (row.evaluated) {
      all.x.push_back(row.generation);
      all.y.push_back(row.report.fitness);
    }
  svg::Series best{"best", "#d62728", {}, {}, true, true};
  for (std::size_t g = 0; g < r.best_per_generation.size(); ++g) {
    best.x.push_back(static_cast<double>(g));
    best.y.push_back(r.best_per_generation[g]);
  }
  chart.series = {all, best};
  return svg::render(chart);
}

void print_report(const FitnessReport& r, Experiment e) {
  fmt::print("fitness = {:.17g}\n", r.fitness);
  if (e == Experiment::kStereoDepth) {
    fmt::print("avg_log_error = {:.17g}\nrmse_m = {:.17g}\ndepth_pixels = {}\n", r.depth.avg_log_error,
               r.depth.rmse_m, r.depth.count);
  } else {
    fmt::print("mean_inliers = {:.17g}\ninlier_ratio = {:.17g}\nap = {:.17g}\nobstacles = {}/{}\n", r.mean_inliers,
               r.match.inlier_ratio(), r.ap, r.obstacles.o_seen, r.obstacles.o_total);
  }
  fmt::print("frames = {}\n", r.frames);
}

int cmd_design(const Overrides& o) {
  const ExperimentConfig c = resolve_config(o);
  fs::create_directories(c.out_dir);
  save_config(c, c.out_dir / "resolved_config.ini");
  const ExperimentSetup setup(c);
  const EvalContext& ctx = setup.context();
  spdlog::info("design: {} run, {} generations x {} genomes, seed {}, output {}", to_string(c.experiment),
               c.ga.n_generations, c.ga.pop_size, c.ga.master_seed, c.out_dir.string());
  // History is rewritten after every generation so an aborted run keeps it.
  const RunResult r = run_joint(ctx, setup.run_options(), [&](const RunResult& partial) {
    write_history_csv(c.out_dir / "history.csv", partial, ctx);
  });
  write_history_csv(c.out_dir / "history.csv", r, ctx);
  if (r.failed) {
    spdlog::error("evaluation failed: {}", r.failure);
    return kExitRuntime;
  }
  write_best_genome(c.out_dir / "best_genome.ini", r.best, ctx);
  if (c.experiment == Experiment::kStereoDepth)
    save_refiner(r.models.refiner, c.out_dir / "refiner.ini");
  else
    save_detector(r.models.detector, c.out_dir / "detector.csv");
  write_text(c.out_dir / "fitness.svg", fitness_svg(r));
  const CameraDesign d = decode(r.best.genome, ctx.spec, ctx.base);
  fmt::print("best genome {} F = {:.6g}\n", r.best.id, r.best.report->fitness);
  fmt::print("hfov_deg = {:.4f} baseline_m = {:.4f} pitch_deg = {:.4f} focal_mm = {:.4f}\n", hfov_deg(d),
             d.baseline_m, d.pitch_deg, d.focal_mm);
  fmt::print("sensor = {:.4g} x {:.4g} mm, pixel {:.4g} um\n", d.sensor_w_mm, d.sensor_h_mm, d.pixel_um);
  return kExitOk;
}

int cmd_eval(const Overrides& o, const std::string& genome_path, const std::string& refiner_path,
             const std::string& detector_path, bool ppm) {
  const ExperimentConfig c = resolve_config(o);
  const ExperimentSetup setup(c);
  const EvalContext& ctx = setup.context();
  const Genome g = read_genome(genome_path, ctx.spec);
  if (!genome_valid(g, ctx.spec)) throw ConfigError("genome in " + genome_path + " violates the parameter bounds");
  const RunOptions ro = setup.run_options();
  TrainableModels models;
  if (refiner_path.empty() && detector_path.empty()) {
    models = pretrain_models(ctx, ro.pretrain_design.value_or(ctx.base), ro.pretrain_frames, ro.pretrain_steps);
  } else {
    models = pretrain_models(ctx, ctx.base, 0, 0);
    if (!refiner_path.empty()) models.refiner = load_refiner(refiner_path);
    if (!detector_path.empty()) models.detector = load_detector(detector_path);
  }
  const FitnessReport r = evaluate(g, ctx, models, 0, 0, 0);
  print_report(r, c.experiment);

  auto os = detail::open_for_write(c.out_dir / "eval_metrics.csv");
  os << "fitness,avg_log_error,rmse_m,depth_pixels,mean_inliers,n_inlier,n_total,inlier_ratio,ap,o_seen,o_total,"
        "frames\n";
  os << fmt::format("{:.17g},{:.17g},{:.17g},{},{:.17g},{},{},{:.17g},{:.17g},{},{},{}\n", r.fitness,
                    r.depth.avg_log_error, r.depth.rmse_m, r.depth.count, r.mean_inliers, r.match.n_inlier,
                    r.match.n_total, r.match.inlier_ratio(), r.ap, r.obstacles.o_seen, r.obstacles.o_total, r.frames);
  if (ppm) {
    const CameraDesign d = decode(g, ctx.spec, ctx.base);
    const auto steps = capture_steps(*ctx.path, ctx.frames_per_eval, ctx.experiment);
    const Frame f = render(*ctx.scene, pose_from_step(ctx.path->steps[steps.front()], d), d, ctx.tasks.render);
    const NoiseModel noise = generalize(ctx.noise, db_to_linear(d.gain_db), d.pixel_um * d.pixel_um);
    write_ppm(c.out_dir / "eval_frame.ppm", synthesize(f.exposed, noise, ctx.master_seed, ctx.tasks.sampler));
  }
  return kExitOk;
}

int cmd_calibrate(const std::string& samples, double g0_db, double pixel_um, const std::string& out) {
  const auto rows = read_samples_csv(samples);
  const Calibration cal = calibrate(rows, db_to_linear(g0_db), pixel_um * pixel_um);
  save_noise_model(cal.model, out);
  fmt::print("sigma_p_sq = {:.6g}\nsigma_r_sq = {:.6g}\nsamples_used = {}\n", cal.model.sigma_p_sq,
             cal.model.sigma_r_sq, cal.used);
  if (cal.clamped) spdlog::warn("a fitted coefficient was negative and clamped to zero");
  return kExitOk;
}

int cmd_validate_noise(const std::string& model_path, const std::string& out, std::uint64_t seed, int levels,
                       int px) {
  const NoiseModel model = model_path.empty() ? NoiseModel{} : load_noise_model(model_path);
  const auto stats = measure_colorbar_noise(model, seed, levels, px);
  const fs::path dir(out);
  auto os = detail::open_for_write(dir / "noise_validation.csv");
  os << "level,albedo,mean,empirical_variance,model_variance\n";
  svg::Series emp{"synthesized", "#1f77b4", {}, {}, false, true};
  svg::Series mod{"model", "#d62728", {}, {}, true, false};
  for (const BarStats& b : stats) {
    os << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g}\n", b.level, b.albedo, b.mean, b.empirical_variance,
                      b.model_variance);
    emp.x.push_back(b.mean);
    emp.y.push_back(b.empirical_variance);
    mod.x.push_back(b.mean);
    mod.y.push_back(b.model_variance);
    fmt::print("level {:2d} mean {:.4f} empirical {:.4e} model {:.4e}\n", b.level, b.mean, b.empirical_variance,
               b.model_variance);
  }
  svg::Chart chart{"Noise variance vs. intensity", "mean intensity", "variance", false, {mod, emp}};
  write_text(dir / "noise_overlay.svg", svg::render(chart));
  return kExitOk;
}

int cmd_catalog_list(const std::string& path) {
  const SensorCatalog cat = load_catalog(path.empty() ? default_catalog_path() : fs::path(path));
  fmt::print("index,id,manufacturer,sensor_w_mm,sensor_h_mm,pixel_um\n");
  for (std::size_t i = 0; i < cat.size(); ++i)
    fmt::print("{},{},{},{:.6g},{:.6g},{:.6g}\n", i, cat[i].id, cat[i].manufacturer, cat[i].sensor_w_mm,
               cat[i].sensor_h_mm, cat[i].pixel_um);
  return kExitOk;
}

int cmd_catalog_snap(const std::string& path, double w, double h, double p, bool normalized) {
  const SensorCatalog cat = load_catalog(path.empty() ? default_catalog_path() : fs::path(path));
  const std::size_t i = snap_index(cat, w, h, p, normalized);
  fmt::print("{},{},{:.6g},{:.6g},{:.6g}\n", i, cat[i].id, cat[i].sensor_w_mm, cat[i].sensor_h_mm, cat[i].pixel_um);
  return kExitOk;
}

int cmd_report(const std::string& history, const std::string& out) {
  if (!fs::exists(history)) throw ConfigError("history file not found: " + history);
  const auto rows = detail::read_csv_rows(history);
  if (rows.empty()) throw ParseError("empty history file", 1);
  const auto& header = rows.front().cells;
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("history lacks column " + name, rows.front().line);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t gen_col = column("generation"), fit_col = column("fitness"), ev_col = column("evaluated");
  std::map<int, double> best;
  svg::Series all{"evaluated", "#9aa5b1", {}, {}, false, true};
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& cells = rows[i].cells;
    double gen = 0, fit = 0, ev = 0;
    if (cells.size() != header.size() || !detail::parse_double(cells[gen_col], gen) ||
        !detail::parse_double(cells[fit_col], fit) || !detail::parse_double(cells[ev_col], ev))
      throw ParseError("malformed history row", rows[i].line);
    const int g = static_cast<int>(gen);
    best[g] = best.count(g) ? std::max(best[g], fit) : fit;
    if (ev != 0) {
      all.x.push_back(gen);
      all.y.push_back(fit);
    }
  }
  svg::Series line{"best", "#d62728", {}, {}, true, true};
  fmt::print("generation,best_fitness\n");
  for (const auto& [g, f] : best) {
    line.x.push_back(g);
    line.y.push_back(f);
    fmt::print("{},{:.17g}\n", g, f);
  }
  svg::Chart chart{"Best fitness per generation", "generation", "fitness F", false, {all, line}};
  write_text(out.empty() ? fs::path(history).replace_extension(".svg") : fs::path(out), svg::render(chart));
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv) {
  setup_logging();
  CLI::App app{"camforge: task-specific camera design by joint optimization"};
  app.require_subcommand(1);

  Overrides design_o;
  auto* design = app.add_subcommand("design", "run the joint camera/task optimization");
  add_common(design, design_o);
  design->add_flag("--frozen", design_o.frozen, "keep task models fixed during the search");
  design->add_option("--scheme", design_o.scheme, "sensor scheme")->check(CLI::IsMember({"discrete", "quantized"}));

  Overrides eval_o;
  std::string genome_path, refiner_path, detector_path;
  bool ppm = false;
  auto* eval = app.add_subcommand("eval", "evaluate one fixed design");
  add_common(eval, eval_o);
  eval->add_option("--genome", genome_path, "genome file (best_genome.ini layout)")->required();
  eval->add_option("--refiner", refiner_path, "trained refiner instead of pretraining");
  eval->add_option("--detector", detector_path, "trained detector instead of pretraining");
  eval->add_flag("--ppm", ppm, "also write the first noisy frame as PPM");

  std::string samples, cal_out;
  double g0_db = 15.0, pixel_um = 1.55;
  auto* cal = app.add_subcommand("calibrate", "fit the affine noise model to (mean, variance) samples");
  cal->add_option("--samples", samples, "CSV with mean,variance columns")->required();
  cal->add_option("--g0-db", g0_db, "gain of the calibration captures");
  cal->add_option("--pixel-um", pixel_um, "pixel pitch of the calibrated sensor");
  cal->add_option("--out", cal_out, "noise model file")->required();

  std::string vn_model, vn_out = ".";
  std::uint64_t vn_seed = 1;
  int vn_levels = 11, vn_px = 100000;
  auto* vn = app.add_subcommand("validate-noise", "compare synthesized and modeled variance on a colorbar");
  vn->add_option("--model", vn_model, "noise model file (default: reference model)");
  vn->add_option("--out", vn_out, "output directory");
  vn->add_option("--seed", vn_seed, "noise seed");
  vn->add_option("--levels", vn_levels, "grey levels");
  vn->add_option("--px-per-level", vn_px, "pixels per grey level");

  std::string cat_path;
  auto* catalog = app.add_subcommand("catalog", "inspect the sensor catalog");
  catalog->require_subcommand(1);
  auto* list = catalog->add_subcommand("list", "print all entries");
  list->add_option("--catalog", cat_path, "catalog CSV (default: bundled)");
  double sw = 0, sh = 0, sp = 0;
  bool normalized = false;
  auto* snap = catalog->add_subcommand("snap", "nearest catalog entry to a (w, h, p) triplet");
  snap->add_option("--catalog", cat_path, "catalog CSV (default: bundled)");
  snap->add_option("--width-mm", sw, "sensor width in mm")->required();
  snap->add_option("--height-mm", sh, "sensor height in mm")->required();
  snap->add_option("--pixel-um", sp, "pixel pitch in um")->required();
  snap->add_flag("--normalized", normalized, "divide components by the catalog range");

  std::string history, report_out;
  auto* report = app.add_subcommand("report", "plot best fitness per generation from a history CSV");
  report->add_option("--history", history, "history.csv from a design run")->required();
  report->add_option("--out", report_out, "SVG path (default: next to the history)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*design) return cmd_design(design_o);
    if (*eval) return cmd_eval(eval_o, genome_path, refiner_path, detector_path, ppm);
    if (*cal) return cmd_calibrate(samples, g0_db, pixel_um, cal_out);
    if (*vn) return cmd_validate_noise(vn_model, vn_out, vn_seed, vn_levels, vn_px);
    if (*list) return cmd_catalog_list(cat_path);
    if (*snap) return cmd_catalog_snap(cat_path, sw, sh, sp, normalized);
    if (*report) return cmd_report(history, report_out);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const ParseError& e) {
    spdlog::error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}

}  // namespace camforge
