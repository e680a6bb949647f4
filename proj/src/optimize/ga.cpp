// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "camforge/error.hpp"
#include "camforge/optimize.hpp"
#include "camforge/rng.hpp"

namespace camforge {

namespace {

const std::set<std::string>& known_params() {
  static const std::set<std::string> names = {"hfov_deg",    "baseline_m", "pitch_deg", "focal_mm",
                                              "height_m",    "exposure_ms", "gain_db",  "n_cameras"};
  return names;
}

double nearest_value(const std::vector<double>& values, double x) {
  auto it = std::lower_bound(values.begin(), values.end(), x);
  if (it == values.end()) return values.back();
  if (it == values.begin()) return *it;
  const double hi = *it, lo = *(it - 1);
  return (x - lo <= hi - x) ? lo : hi;
}

std::size_t snap_latent(const SensorParam& s, const std::array<double, 3>& latent) {
  return snap_index(*s.catalog, latent[0], latent[1], latent[2], s.normalized);
}

void set_sensor_from_index(Genome& g, const SensorParam& s, std::size_t index) {
  g.sensor_index = static_cast<int>(index);
  g.sensor_latent = (*s.catalog)[index].triplet();
}

}  // namespace

std::string to_string(SensorScheme scheme) {
  return scheme == SensorScheme::kFullyDiscrete ? "discrete" : "quantized";
}

SensorScheme sensor_scheme_from_string(const std::string& s) {
  if (s == "discrete" || s == "fully_discrete") return SensorScheme::kFullyDiscrete;
  if (s == "quantized" || s == "quantized_continuous") return SensorScheme::kQuantizedContinuous;
  throw ConfigError("unknown sensor scheme '" + s + "' (expected discrete or quantized)");
}

std::string to_string(InitPreset preset) {
  switch (preset) {
    case InitPreset::kAllMin: return "all_min";
    case InitPreset::kAllMax: return "all_max";
    default: return "random";
  }
}

InitPreset init_preset_from_string(const std::string& s) {
  if (s == "random") return InitPreset::kRandom;
  if (s == "all_min") return InitPreset::kAllMin;
  if (s == "all_max") return InitPreset::kAllMax;
  throw ConfigError("unknown init preset '" + s + "' (expected random, all_min or all_max)");
}

void ParamSpec::validate() const {
  std::set<std::string> seen;
  for (const ParamDef& p : params) {
    if (!known_params().count(p.name)) throw ConfigError("unknown parameter '" + p.name + "'");
    if (!seen.insert(p.name).second) throw ConfigError("duplicate parameter '" + p.name + "'");
    if (!(p.add_range >= 0.0)) throw ConfigError("add_range of '" + p.name + "' must be >= 0");
    if (p.kind == ParamKind::kContinuous) {
      if (!(p.lo < p.hi)) throw ConfigError("parameter '" + p.name + "' needs lo < hi");
    } else {
      if (p.values.empty()) throw ConfigError("parameter '" + p.name + "' has an empty value list");
      if (!std::is_sorted(p.values.begin(), p.values.end()))
        throw ConfigError("value list of '" + p.name + "' must be ascending");
    }
  }
  if (has_sensor()) {
    if (sensor.catalog->empty()) throw EmptyCatalog("sensor catalog is empty");
    if (!(sensor.add_range >= 0.0)) throw ConfigError("sensor add_range must be >= 0");
  }
  if (params.empty() && !has_sensor()) throw ConfigError("design space is empty");
}

bool genome_valid(const Genome& g, const ParamSpec& spec) {
  if (g.values.size() != spec.params.size()) return false;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const ParamDef& p = spec.params[i];
    const double x = g.values[i];
    if (!std::isfinite(x)) return false;
    if (p.kind == ParamKind::kContinuous) {
      if (x < p.lo || x > p.hi) return false;
    } else if (std::find(p.values.begin(), p.values.end(), x) == p.values.end()) {
      return false;
    }
  }
  if (!spec.has_sensor()) return g.sensor_index < 0;
  const SensorCatalog& cat = *spec.sensor.catalog;
  if (g.sensor_index < 0 || static_cast<std::size_t>(g.sensor_index) >= cat.size()) return false;
  if (spec.sensor.scheme == SensorScheme::kFullyDiscrete)
    return g.sensor_latent == cat[static_cast<std::size_t>(g.sensor_index)].triplet();
  for (int k = 0; k < 3; ++k)
    if (!(g.sensor_latent[k] >= cat.lo()[k] && g.sensor_latent[k] <= cat.hi()[k])) return false;
  return snap_latent(spec.sensor, g.sensor_latent) == static_cast<std::size_t>(g.sensor_index);
}

CameraDesign decode(const Genome& g, const ParamSpec& spec, const CameraDesign& base) {
  if (g.values.size() != spec.params.size()) throw PreconditionError("genome does not match the parameter spec");
  CameraDesign d = base;
  if (spec.has_sensor()) {
    if (g.sensor_index < 0 || static_cast<std::size_t>(g.sensor_index) >= spec.sensor.catalog->size())
      throw PreconditionError("genome sensor index outside the catalog");
    const SensorEntry& e = (*spec.sensor.catalog)[static_cast<std::size_t>(g.sensor_index)];
    d.sensor_w_mm = e.sensor_w_mm;
    d.sensor_h_mm = e.sensor_h_mm;
    d.pixel_um = e.pixel_um;
  }
  std::optional<double> hfov;
  for (std::size_t i = 0; i < g.values.size(); ++i) {
    const std::string& name = spec.params[i].name;
    const double x = g.values[i];
    if (name == "hfov_deg") hfov = x;
    else if (name == "baseline_m") d.baseline_m = x;
    else if (name == "pitch_deg") d.pitch_deg = x;
    else if (name == "focal_mm") d.focal_mm = x;
    else if (name == "height_m") d.height_m = x;
    else if (name == "exposure_ms") d.exposure_ms = x;
    else if (name == "gain_db") d.gain_db = x;
    else if (name == "n_cameras") d.n_cameras = static_cast<int>(std::lround(x));
    else throw PreconditionError("unknown parameter '" + name + "'");
  }
  // The field of view is a property of focal length and sensor width together.
  if (hfov) d.focal_mm = fov_to_focal(*hfov, d.sensor_w_mm);
  return d;
}

void GAConfig::validate() const {
  if (pop_size < 1) throw ConfigError("pop_size must be >= 1");
  if (!(n_elites >= 0 && n_elites < n_parents && n_parents <= pop_size))
    throw ConfigError("need 0 <= n_elites < n_parents <= pop_size");
  if (n_generations < 1) throw ConfigError("n_generations must be >= 1");
  if (!(mutate_factor_range[0] <= 1.0 && 1.0 <= mutate_factor_range[1]) || !(mutate_factor_range[0] > 0.0))
    throw ConfigError("mutation factor range must be positive and contain 1");
  if (frames_per_eval < 1) throw ConfigError("frames_per_eval must be >= 1");
}

std::vector<Genome> init_population(const ParamSpec& spec, const GAConfig& config, InitPreset preset) {
  spec.validate();
  std::vector<Genome> pop;
  pop.reserve(static_cast<std::size_t>(config.pop_size));
  for (int slot = 0; slot < config.pop_size; ++slot) {
    Rng rng(derive_seed(config.master_seed, Purpose::kInit, {static_cast<std::uint64_t>(slot)}));
    Genome g;
    for (const ParamDef& p : spec.params) {
      if (p.kind == ParamKind::kContinuous) {
        if (preset == InitPreset::kAllMin) g.values.push_back(p.lo);
        else if (preset == InitPreset::kAllMax) g.values.push_back(p.hi);
        else g.values.push_back(uniform(rng, p.lo, p.hi));
      } else {
        if (preset == InitPreset::kAllMin) g.values.push_back(p.values.front());
        else if (preset == InitPreset::kAllMax) g.values.push_back(p.values.back());
        else {
          std::uniform_int_distribution<std::size_t> pick(0, p.values.size() - 1);
          g.values.push_back(p.values[pick(rng)]);
        }
      }
    }
    if (spec.has_sensor()) {
      const SensorCatalog& cat = *spec.sensor.catalog;
      if (preset != InitPreset::kRandom) {
        const auto& corner = preset == InitPreset::kAllMin ? cat.lo() : cat.hi();
        const std::size_t idx = snap_latent(spec.sensor, corner);
        if (spec.sensor.scheme == SensorScheme::kQuantizedContinuous) {
          g.sensor_latent = corner;
          g.sensor_index = static_cast<int>(idx);
        } else {
          set_sensor_from_index(g, spec.sensor, idx);
        }
      } else if (spec.sensor.scheme == SensorScheme::kFullyDiscrete) {
        std::uniform_int_distribution<std::size_t> pick(0, cat.size() - 1);
        set_sensor_from_index(g, spec.sensor, pick(rng));
      } else {
        for (int k = 0; k < 3; ++k) g.sensor_latent[k] = uniform(rng, cat.lo()[k], cat.hi()[k]);
        g.sensor_index = static_cast<int>(snap_latent(spec.sensor, g.sensor_latent));
      }
    }
    pop.push_back(std::move(g));
  }
  return pop;
}

Genome mutate(const Genome& genome, const ParamSpec& spec, std::array<double, 2> factor, std::uint64_t seed) {
  Rng rng(seed);
  auto perturb = [&](double x, double add_range) {
    const double u = factor[0] == factor[1] ? factor[0] : uniform(rng, factor[0], factor[1]);
    const double a = add_range > 0.0 ? uniform(rng, -add_range, add_range) : 0.0;
    return x * u + a;
  };
  Genome g = genome;
  for (std::size_t i = 0; i < spec.params.size(); ++i) {
    const ParamDef& p = spec.params[i];
    const double proposal = perturb(g.values[i], p.add_range);
    g.values[i] = p.kind == ParamKind::kContinuous ? std::clamp(proposal, p.lo, p.hi)
                                                   : nearest_value(p.values, proposal);
  }
  if (spec.has_sensor()) {
    const SensorCatalog& cat = *spec.sensor.catalog;
    if (spec.sensor.scheme == SensorScheme::kFullyDiscrete) {
      const int n = static_cast<int>(cat.size());
      const int reach = static_cast<int>(std::ceil(spec.sensor.add_range));
      std::uniform_int_distribution<int> step(-reach, reach);
      const int idx = std::clamp(g.sensor_index + step(rng), 0, n - 1);
      set_sensor_from_index(g, spec.sensor, static_cast<std::size_t>(idx));
    } else {
      for (int k = 0; k < 3; ++k)
        g.sensor_latent[k] = std::clamp(perturb(g.sensor_latent[k], spec.sensor.add_range), cat.lo()[k], cat.hi()[k]);
      g.sensor_index = static_cast<int>(snap_latent(spec.sensor, g.sensor_latent));
    }
  }
  return g;
}

Genome crossover_uniform(std::span<const Genome> parents, std::uint64_t seed) {
  if (parents.size() < 2) throw PreconditionError("crossover needs at least two parents");
  for (const Genome& p : parents)
    if (p.values.size() != parents[0].values.size()) throw PreconditionError("parents differ in length");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, parents.size() - 1);
  Genome child;
  child.values.resize(parents[0].values.size());
  for (std::size_t i = 0; i < child.values.size(); ++i) child.values[i] = parents[pick(rng)].values[i];
  const Genome& s = parents[pick(rng)];
  child.sensor_latent = s.sensor_latent;
  child.sensor_index = s.sensor_index;
  return child;
}

double fitness_stereo(const DepthMetrics& m) {
  if (!(m.avg_log_error >= 0.0)) throw PreconditionError("avg_log_error must be >= 0");
  return 1.0 / (m.avg_log_error + kFitnessEpsilon);
}

double fitness_mono(double n_inlier, double ratio, double ap, double obstacle_ratio, const MonoWeights& w) {
  return w.feature * (w.inlier * n_inlier + w.ratio * ratio) + w.od * ap + w.obstacle * obstacle_ratio;
}

double fitness_mono(const MatchResult& match, double ap, const ObstacleReport& obstacles, const MonoWeights& w) {
  return fitness_mono(match.n_inlier, match.inlier_ratio(), ap, obstacles.ratio(), w);
}

GAState step_generation(const GAState& state, const ParamSpec& spec, const GAConfig& config) {
  const auto n = state.population.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (const Individual& ind : state.population)
    if (!ind.report) throw PreconditionError("step_generation needs an evaluated population");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return state.population[a].report->fitness > state.population[b].report->fitness;
  });

  GAState next;
  next.generation = state.generation + 1;
  next.next_id = state.next_id;
  const auto n_elites = std::min<std::size_t>(static_cast<std::size_t>(std::max(config.n_elites, 0)), n);
  for (std::size_t i = 0; i < n_elites; ++i) next.population.push_back(state.population[order[i]]);

  const auto n_parents = std::min<std::size_t>(static_cast<std::size_t>(std::max(config.n_parents, 1)), n);
  std::vector<Genome> parents;
  for (std::size_t i = 0; i < n_parents; ++i) parents.push_back(state.population[order[i]].genome);
  for (std::size_t slot = n_elites; slot < n; ++slot) {
    const std::uint64_t gen = static_cast<std::uint64_t>(state.generation);
    Genome child = parents.size() >= 2
                       ? crossover_uniform(parents, derive_seed(config.master_seed, Purpose::kCrossover, {gen, slot}))
                       : parents.front();
    Individual ind;
    ind.id = next.next_id++;
    ind.genome = mutate(child, spec, config.mutate_factor_range,
                        derive_seed(config.master_seed, Purpose::kMutation, {gen, slot}));
    next.population.push_back(std::move(ind));
  }
  return next;
}

}  // namespace camforge
