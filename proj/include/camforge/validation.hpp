// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "camforge/camera.hpp"
#include "camforge/noise.hpp"

namespace camforge {

/// Noiseless render of an `n_levels` colorbar target framed edge to edge,
/// with at least `px_per_level` pixels per bar. Under the day preset the
/// exposed value of bar k equals its albedo k / (n_levels - 1).
Frame render_colorbar(int n_levels, int px_per_level);

struct BarStats {
  int level = 0;
  double albedo = 0.0;
  double mean = 0.0;
  double empirical_variance = 0.0;
  double model_variance = 0.0;  // variance_at(model, mean)
};

/// Synthesizes noise on the colorbar and measures per-bar statistics over all
/// three channels.
std::vector<BarStats> measure_colorbar_noise(const NoiseModel& model, std::uint64_t seed,
                                             int n_levels = 11, int px_per_level = 100000,
                                             NoiseSampler sampler = NoiseSampler::kGaussian);

}  // namespace camforge
