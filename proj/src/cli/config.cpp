// SPDX-License-Identifier: Apache-2.0
#include "camforge/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "../text_io.hpp"
#include "camforge/error.hpp"

namespace camforge {

namespace pt = boost::property_tree;

namespace {

std::string g17(double x) { return fmt::format("{:.17g}", x); }

// Reads one INI section and remembers which keys were consumed so typos
// surface as errors instead of silently falling back to defaults.
class Section {
 public:
  Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

  template <class T>
  void read(const std::string& key, T& out) {
    used_.insert(key);
    if (!tree_) return;
    const auto it = tree_->find(key);
    if (it == tree_->not_found()) return;
    try {
      out = it->second.get_value<T>();
    } catch (const pt::ptree_error&) {
      throw ConfigError(fmt::format("[{}] {}: cannot parse '{}'", name_, key, it->second.data()));
    }
  }

  std::optional<std::string> text(const std::string& key) {
    used_.insert(key);
    if (!tree_) return std::nullopt;
    const auto it = tree_->find(key);
    if (it == tree_->not_found()) return std::nullopt;
    return std::string(detail::trim(it->second.data()));
  }

  template <class T>
  void read_optional(const std::string& key, std::optional<T>& out) {
    if (auto s = text(key)) {
      T v{};
      std::istringstream is(*s);
      if (!(is >> v) || !(is >> std::ws).eof())
        throw ConfigError(fmt::format("[{}] {}: cannot parse '{}'", name_, key, *s));
      out = v;
    }
  }

  void check_unused() const {
    if (!tree_) return;
    for (const auto& [key, value] : *tree_)
      if (!used_.count(key)) throw ConfigError(fmt::format("[{}] unknown key '{}'", name_, key));
  }

 private:
  const pt::ptree* tree_;
  std::string name_;
  std::set<std::string> used_;
};

const pt::ptree* child(const pt::ptree& root, const std::string& name) {
  const auto it = root.find(name);
  return it == root.not_found() ? nullptr : &it->second;
}

std::vector<double> parse_list(const std::string& s, const std::string& where) {
  std::vector<double> out;
  for (const std::string& item : detail::split_csv(s)) {
    double v = 0.0;
    if (!detail::parse_double(item, v)) throw ConfigError(where + ": bad list value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

std::string to_string(NoiseSampler s) { return s == NoiseSampler::kGaussian ? "gaussian" : "poisson_gaussian"; }

NoiseSampler sampler_from_string(const std::string& s) {
  if (s == "gaussian") return NoiseSampler::kGaussian;
  if (s == "poisson_gaussian") return NoiseSampler::kPoissonGaussian;
  throw ConfigError("unknown sampler '" + s + "' (expected gaussian or poisson_gaussian)");
}

std::string to_string(StereoMask m) { return m == StereoMask::kFiniteDepth ? "finite_depth" : "gt_valid"; }

StereoMask mask_from_string(const std::string& s) {
  if (s == "finite_depth") return StereoMask::kFiniteDepth;
  if (s == "gt_valid") return StereoMask::kGtValid;
  throw ConfigError("unknown stereo mask '" + s + "' (expected finite_depth or gt_valid)");
}

std::string to_string(ParamKind k) { return k == ParamKind::kContinuous ? "continuous" : "discrete"; }

}  // namespace

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::kDay: return "day";
    case Scenario::kNight: return "night";
    default: return "none";
  }
}

Scenario scenario_from_string(const std::string& s) {
  if (s == "day") return Scenario::kDay;
  if (s == "night") return Scenario::kNight;
  if (s == "none" || s.empty()) return Scenario::kNone;
  throw ConfigError("unknown scenario '" + s + "' (expected day, night or none)");
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  pt::ptree root;
  try {
    pt::read_ini(path.string(), root);
  } catch (const pt::ptree_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  const std::filesystem::path dir = std::filesystem::absolute(path).parent_path();
  ExperimentConfig c;

  Section ex(child(root, "experiment"), "experiment");
  if (auto s = ex.text("kind")) c.experiment = experiment_from_string(*s);
  if (auto s = ex.text("scenario")) c.scenario = scenario_from_string(*s);
  if (auto s = ex.text("catalog")) c.catalog_path = resolve(dir, *s);
  if (auto s = ex.text("noise_model")) c.noise_model_path = resolve(dir, *s);
  if (auto s = ex.text("out_dir")) c.out_dir = resolve(dir, *s);
  ex.read("workers", c.workers);
  ex.read("frozen", c.frozen);
  ex.check_unused();

  Section sc(child(root, "scene"), "scene");
  if (auto s = sc.text("kind")) c.scene.kind = scene_kind_from_string(*s);
  sc.read("width_m", c.scene.extent_m.x);
  sc.read("length_m", c.scene.extent_m.y);
  sc.read("height_m", c.scene.extent_m.z);
  sc.read("min_room_length_m", c.scene.min_room_length_m);
  sc.read("object_class_count", c.scene.object_class_count);
  sc.read("objects_per_room", c.scene.objects_per_room);
  sc.read("obstacle_height_m", c.scene.obstacle_height_m);
  sc.read("door_width_m", c.scene.door_width_m);
  sc.read("texture_cycles_per_m", c.scene.texture_cycles_per_m);
  std::optional<double> lux;
  sc.read_optional("illuminance_lux", lux);
  sc.read("seed", c.scene.seed);
  sc.read("path_steps", c.path_steps);
  sc.read("path_seed", c.path_seed);
  sc.check_unused();

  Section cam(child(root, "camera"), "camera");
  cam.read("pitch_deg", c.base.pitch_deg);
  cam.read("height_m", c.base.height_m);
  cam.read("focal_mm", c.base.focal_mm);
  cam.read("sensor_w_mm", c.base.sensor_w_mm);
  cam.read("sensor_h_mm", c.base.sensor_h_mm);
  cam.read("pixel_um", c.base.pixel_um);
  cam.read("exposure_ms", c.base.exposure_ms);
  std::optional<double> gain;
  cam.read_optional("gain_db", gain);
  cam.read("baseline_m", c.base.baseline_m);
  cam.read("n_cameras", c.base.n_cameras);
  cam.read("aperture_fnum", c.base.aperture_fnum);
  cam.check_unused();

  // Presets fix lighting and gain; explicit values may only repeat them.
  if (c.scenario != Scenario::kNone) {
    const double want_lux = c.scenario == Scenario::kDay ? kDayLux : kNightLux;
    const double want_gain = c.scenario == Scenario::kDay ? kDayGainDb : kNightGainDb;
    if (lux && *lux != want_lux)
      throw ConfigError(fmt::format("scenario {} uses {} lux, config sets {}", to_string(c.scenario), want_lux, *lux));
    if (gain && *gain != want_gain)
      throw ConfigError(
          fmt::format("scenario {} uses {} dB gain, config sets {}", to_string(c.scenario), want_gain, *gain));
    lux = want_lux;
    gain = want_gain;
  }
  if (lux) c.scene.illuminance_lux = *lux;
  if (gain) c.base.gain_db = *gain;

  for (const auto& [name, section] : root) {
    if (name.rfind("param.", 0) != 0) continue;
    ParamDef p;
    p.name = name.substr(6);
    Section ps(&section, name);
    std::string kind = "continuous";
    ps.read("kind", kind);
    if (kind == "continuous") {
      p.kind = ParamKind::kContinuous;
    } else if (kind == "discrete") {
      p.kind = ParamKind::kDiscrete;
    } else {
      throw ConfigError("[" + name + "] unknown kind '" + kind + "'");
    }
    ps.read("lo", p.lo);
    ps.read("hi", p.hi);
    ps.read("add_range", p.add_range);
    if (auto v = ps.text("values")) p.values = parse_list(*v, "[" + name + "] values");
    if (p.kind == ParamKind::kDiscrete && !p.values.empty()) {
      p.lo = p.values.front();
      p.hi = p.values.back();
    }
    ps.check_unused();
    c.params.push_back(std::move(p));
  }

  Section se(child(root, "sensor"), "sensor");
  se.read("enabled", c.sensor_enabled);
  if (auto s = se.text("scheme")) c.scheme = sensor_scheme_from_string(*s);
  se.read("add_range", c.sensor_add_range);
  se.read("normalized", c.sensor_normalized);
  se.check_unused();

  Section ga(child(root, "ga"), "ga");
  ga.read("pop_size", c.ga.pop_size);
  ga.read("n_elites", c.ga.n_elites);
  ga.read("n_parents", c.ga.n_parents);
  ga.read("n_generations", c.ga.n_generations);
  ga.read("factor_lo", c.ga.mutate_factor_range[0]);
  ga.read("factor_hi", c.ga.mutate_factor_range[1]);
  ga.read("master_seed", c.ga.master_seed);
  ga.read("frames_per_eval", c.ga.frames_per_eval);
  if (auto s = ga.text("init")) c.init = init_preset_from_string(*s);
  ga.check_unused();

  Section pre(child(root, "pretrain"), "pretrain");
  pre.read("frames", c.pretrain_frames);
  pre.read("steps", c.pretrain_steps);
  pre.read_optional("hfov_deg", c.pretrain_hfov_deg);
  pre.read_optional("baseline_m", c.pretrain_baseline_m);
  pre.check_unused();

  TaskSettings& t = c.tasks;
  Section ts(child(root, "tasks"), "tasks");
  ts.read("render_max_width", t.render.max_width);
  ts.read("render_max_height", t.render.max_height);
  ts.read("render_scale", t.render.scale);
  ts.read("supersample", t.render.supersample);
  if (auto s = ts.text("sampler")) t.sampler = sampler_from_string(*s);
  ts.read("block_window", t.block_window);
  ts.read("d_max_native", t.d_max_native);
  if (auto s = ts.text("stereo_mask")) t.stereo_mask = mask_from_string(*s);
  ts.read("refiner_lr", t.refiner_lr);
  ts.read("refiner_steps", t.refiner_steps);
  ts.read("max_features", t.max_features);
  ts.read("ratio_test", t.ratio_test);
  ts.read("ransac_iterations", t.ransac_iterations);
  ts.read("inlier_px", t.inlier_px);
  ts.read("obstacle_min_px", t.obstacle_min_px);
  ts.read("detector_lr", t.detector_lr);
  ts.read("detector_steps", t.detector_steps);
  ts.read("score_threshold", t.inference.score_threshold);
  ts.read("nms_iou", t.inference.nms_iou);
  ts.read("max_per_class", t.inference.max_per_class);
  ts.read("gt_min_px", t.gt_min_px);
  ts.check_unused();

  Section w(child(root, "weights"), "weights");
  w.read("feature", c.weights.feature);
  w.read("inlier", c.weights.inlier);
  w.read("ratio", c.weights.ratio);
  w.read("od", c.weights.od);
  w.read("obstacle", c.weights.obstacle);
  w.check_unused();

  static const std::set<std::string> known{"experiment", "scene",   "camera", "sensor",
                                           "ga",         "pretrain", "tasks",  "weights"};
  for (const auto& [name, section] : root)
    if (!known.count(name) && name.rfind("param.", 0) != 0) throw ConfigError("unknown section [" + name + "]");

  if (c.out_dir.empty()) c.out_dir = (dir / "runs" / path.stem()).lexically_normal();
  validate(c);
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.path_steps < 2) throw ConfigError("path_steps must be at least 2");
  if (c.pretrain_frames < 0 || c.pretrain_steps < 0) throw ConfigError("pretrain frames and steps must be >= 0");
  const MonoWeights& w = c.weights;
  for (double v : {w.feature, w.inlier, w.ratio, w.od, w.obstacle})
    if (!(v >= 0.0)) throw ConfigError("fitness weights must be >= 0");
  if (c.params.empty() && !c.sensor_enabled) throw ConfigError("config optimizes no parameter");
  if (!c.catalog_path.empty() && !std::filesystem::exists(c.catalog_path))
    throw ConfigError("catalog file not found: " + c.catalog_path.string());
  if (!c.noise_model_path.empty() && !std::filesystem::exists(c.noise_model_path))
    throw ConfigError("noise model file not found: " + c.noise_model_path.string());
  if (c.experiment == Experiment::kStereoDepth && !(c.base.baseline_m > 0.0) && !c.pretrain_baseline_m)
    throw ConfigError("stereo experiments need a positive camera baseline_m for pretraining");
  if (c.scenario == Scenario::kDay && (c.scene.illuminance_lux != kDayLux || c.base.gain_db != kDayGainDb))
    throw ConfigError("day scenario pairs 20 lux with 5 dB");
  if (c.scenario == Scenario::kNight && (c.scene.illuminance_lux != kNightLux || c.base.gain_db != kNightGainDb))
    throw ConfigError("night scenario pairs 2 lux with 15 dB");
  c.ga.validate();
  ParamSpec spec;
  spec.params = c.params;
  spec.validate();
}

void save_config(const ExperimentConfig& c, const std::filesystem::path& path) {
  auto os = detail::open_for_write(path);
  const TaskSettings& t = c.tasks;
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "[experiment]\n"
     << "kind = " << to_string(c.experiment) << '\n'
     << "scenario = " << to_string(c.scenario) << '\n'
     << "catalog = " << c.catalog_path.string() << '\n'
     << "noise_model = " << c.noise_model_path.string() << '\n'
     << "out_dir = " << c.out_dir.string() << '\n'
     << "workers = " << c.workers << '\n'
     << "frozen = " << b(c.frozen) << "\n\n";
  os << "[scene]\n"
     << "kind = " << to_string(c.scene.kind) << '\n'
     << "width_m = " << g17(c.scene.extent_m.x) << '\n'
     << "length_m = " << g17(c.scene.extent_m.y) << '\n'
     << "height_m = " << g17(c.scene.extent_m.z) << '\n'
     << "min_room_length_m = " << g17(c.scene.min_room_length_m) << '\n'
     << "object_class_count = " << c.scene.object_class_count << '\n'
     << "objects_per_room = " << c.scene.objects_per_room << '\n'
     << "obstacle_height_m = " << g17(c.scene.obstacle_height_m) << '\n'
     << "door_width_m = " << g17(c.scene.door_width_m) << '\n'
     << "texture_cycles_per_m = " << g17(c.scene.texture_cycles_per_m) << '\n'
     << "illuminance_lux = " << g17(c.scene.illuminance_lux) << '\n'
     << "seed = " << c.scene.seed << '\n'
     << "path_steps = " << c.path_steps << '\n'
     << "path_seed = " << c.path_seed << "\n\n";
  os << "[camera]\n"
     << "pitch_deg = " << g17(c.base.pitch_deg) << '\n'
     << "height_m = " << g17(c.base.height_m) << '\n'
     << "focal_mm = " << g17(c.base.focal_mm) << '\n'
     << "sensor_w_mm = " << g17(c.base.sensor_w_mm) << '\n'
     << "sensor_h_mm = " << g17(c.base.sensor_h_mm) << '\n'
     << "pixel_um = " << g17(c.base.pixel_um) << '\n'
     << "exposure_ms = " << g17(c.base.exposure_ms) << '\n'
     << "gain_db = " << g17(c.base.gain_db) << '\n'
     << "baseline_m = " << g17(c.base.baseline_m) << '\n'
     << "n_cameras = " << c.base.n_cameras << '\n'
     << "aperture_fnum = " << g17(c.base.aperture_fnum) << "\n\n";
  for (const ParamDef& p : c.params) {
    os << "[param." << p.name << "]\n"
       << "kind = " << to_string(p.kind) << '\n'
       << "lo = " << g17(p.lo) << '\n'
       << "hi = " << g17(p.hi) << '\n'
       << "add_range = " << g17(p.add_range) << '\n';
    if (!p.values.empty()) {
      os << "values = ";
      for (std::size_t i = 0; i < p.values.size(); ++i) os << (i ? "," : "") << g17(p.values[i]);
      os << '\n';
    }
    os << '\n';
  }
  os << "[sensor]\n"
     << "enabled = " << b(c.sensor_enabled) << '\n'
     << "scheme = " << to_string(c.scheme) << '\n'
     << "add_range = " << g17(c.sensor_add_range) << '\n'
     << "normalized = " << b(c.sensor_normalized) << "\n\n";
  os << "[ga]\n"
     << "pop_size = " << c.ga.pop_size << '\n'
     << "n_elites = " << c.ga.n_elites << '\n'
     << "n_parents = " << c.ga.n_parents << '\n'
     << "n_generations = " << c.ga.n_generations << '\n'
     << "factor_lo = " << g17(c.ga.mutate_factor_range[0]) << '\n'
     << "factor_hi = " << g17(c.ga.mutate_factor_range[1]) << '\n'
     << "master_seed = " << c.ga.master_seed << '\n'
     << "frames_per_eval = " << c.ga.frames_per_eval << '\n'
     << "init = " << to_string(c.init) << "\n\n";
  os << "[pretrain]\n"
     << "frames = " << c.pretrain_frames << '\n'
     << "steps = " << c.pretrain_steps << '\n';
  if (c.pretrain_hfov_deg) os << "hfov_deg = " << g17(*c.pretrain_hfov_deg) << '\n';
  if (c.pretrain_baseline_m) os << "baseline_m = " << g17(*c.pretrain_baseline_m) << '\n';
  os << "\n[tasks]\n"
     << "render_max_width = " << t.render.max_width << '\n'
     << "render_max_height = " << t.render.max_height << '\n'
     << "render_scale = " << g17(t.render.scale) << '\n'
     << "supersample = " << t.render.supersample << '\n'
     << "sampler = " << to_string(t.sampler) << '\n'
     << "block_window = " << t.block_window << '\n'
     << "d_max_native = " << g17(t.d_max_native) << '\n'
     << "stereo_mask = " << to_string(t.stereo_mask) << '\n'
     << "refiner_lr = " << g17(t.refiner_lr) << '\n'
     << "refiner_steps = " << t.refiner_steps << '\n'
     << "max_features = " << t.max_features << '\n'
     << "ratio_test = " << g17(t.ratio_test) << '\n'
     << "ransac_iterations = " << t.ransac_iterations << '\n'
     << "inlier_px = " << g17(t.inlier_px) << '\n'
     << "obstacle_min_px = " << t.obstacle_min_px << '\n'
     << "detector_lr = " << g17(t.detector_lr) << '\n'
     << "detector_steps = " << t.detector_steps << '\n'
     << "score_threshold = " << g17(t.inference.score_threshold) << '\n'
     << "nms_iou = " << g17(t.inference.nms_iou) << '\n'
     << "max_per_class = " << t.inference.max_per_class << '\n'
     << "gt_min_px = " << t.gt_min_px << "\n\n";
  os << "[weights]\n"
     << "feature = " << g17(c.weights.feature) << '\n'
     << "inlier = " << g17(c.weights.inlier) << '\n'
     << "ratio = " << g17(c.weights.ratio) << '\n'
     << "od = " << g17(c.weights.od) << '\n'
     << "obstacle = " << g17(c.weights.obstacle) << '\n';
}

ExperimentSetup::ExperimentSetup(const ExperimentConfig& config) : config_(config) {
  validate(config_);
  scene_ = std::make_unique<SceneInstance>(generate_scene(config_.scene));
  path_ = std::make_unique<AgentPath>(plan_path(*scene_, config_.path_steps, config_.path_seed));
  ctx_.experiment = config_.experiment;
  ctx_.scene = scene_.get();
  ctx_.path = path_.get();
  ctx_.spec.params = config_.params;
  if (config_.sensor_enabled) {
    ctx_.spec.sensor.catalog = std::make_shared<const SensorCatalog>(
        load_catalog(config_.catalog_path.empty() ? default_catalog_path() : config_.catalog_path));
    ctx_.spec.sensor.scheme = config_.scheme;
    ctx_.spec.sensor.add_range = config_.sensor_add_range;
    ctx_.spec.sensor.normalized = config_.sensor_normalized;
  }
  ctx_.base = config_.base;
  ctx_.noise = config_.noise_model_path.empty() ? NoiseModel{} : load_noise_model(config_.noise_model_path);
  ctx_.tasks = config_.tasks;
  ctx_.weights = config_.weights;
  ctx_.master_seed = config_.ga.master_seed;
  ctx_.frames_per_eval = config_.ga.frames_per_eval;
}

RunOptions ExperimentSetup::run_options() const {
  RunOptions o;
  o.ga = config_.ga;
  o.preset = config_.init;
  o.frozen = config_.frozen;
  o.workers = config_.workers;
  o.pretrain_frames = config_.pretrain_frames;
  o.pretrain_steps = config_.pretrain_steps;
  if (config_.pretrain_hfov_deg || config_.pretrain_baseline_m) {
    CameraDesign d = config_.base;
    if (config_.pretrain_hfov_deg) d.focal_mm = fov_to_focal(*config_.pretrain_hfov_deg, d.sensor_w_mm);
    if (config_.pretrain_baseline_m) d.baseline_m = *config_.pretrain_baseline_m;
    o.pretrain_design = d;
  }
  return o;
}

}  // namespace camforge
