// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "camforge/optimize.hpp"

namespace camforge {

/// Lighting and gain presets for the mono experiment.
enum class Scenario { kNone, kDay, kNight };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& s);

inline constexpr double kDayLux = 20.0;
inline constexpr double kDayGainDb = 5.0;
inline constexpr double kNightLux = 2.0;
inline constexpr double kNightGainDb = 15.0;

/// One experiment as read from an INI file. Paths are absolute once loaded.
struct ExperimentConfig {
  Experiment experiment = Experiment::kStereoDepth;
  Scenario scenario = Scenario::kNone;
  SceneSpec scene;
  int path_steps = 60;
  std::uint64_t path_seed = 1;
  CameraDesign base;
  std::vector<ParamDef> params;
  bool sensor_enabled = false;
  SensorScheme scheme = SensorScheme::kQuantizedContinuous;
  double sensor_add_range = 0.0;
  bool sensor_normalized = false;
  std::filesystem::path catalog_path;      // empty: bundled catalog
  std::filesystem::path noise_model_path;  // empty: reference model
  GAConfig ga;
  InitPreset init = InitPreset::kRandom;
  int workers = 1;
  bool frozen = false;
  int pretrain_frames = 4;
  int pretrain_steps = 200;
  std::optional<double> pretrain_hfov_deg;
  std::optional<double> pretrain_baseline_m;
  TaskSettings tasks;
  MonoWeights weights;
  std::filesystem::path out_dir;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Reads and validates an INI experiment file. Relative paths resolve
/// against the file's directory. Throws ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Writes every field, so the output re-parses to an equal config.
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

/// Throws ConfigError on inconsistent values or missing referenced files.
void validate(const ExperimentConfig& config);

/// Scene, path, catalog and noise model built from a config; owns what the
/// evaluation context points to.
class ExperimentSetup {
 public:
  explicit ExperimentSetup(const ExperimentConfig& config);
  const EvalContext& context() const noexcept { return ctx_; }
  RunOptions run_options() const;
  const ExperimentConfig& config() const noexcept { return config_; }

 private:
  ExperimentConfig config_;
  std::unique_ptr<SceneInstance> scene_;
  std::unique_ptr<AgentPath> path_;
  EvalContext ctx_;
};

/// Entry point shared by the executable and tests. Returns 0, 2 (config
/// error) or 3 (runtime failure).
int run_cli(int argc, char** argv);

}  // namespace camforge
