// SPDX-License-Identifier: Apache-2.0
#include "camforge/validation.hpp"

#include <algorithm>
#include <cmath>

#include "camforge/error.hpp"

namespace camforge {

Frame render_colorbar(int n_levels, int px_per_level) {
  if (px_per_level < 1) throw PreconditionError("px_per_level must be positive");
  const SceneInstance target = make_colorbar_target(n_levels);
  // Bars are `cols` wide; rows stay below the image width so the square
  // target fills the frame vertically.
  const int cols = std::max(100, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(px_per_level) / n_levels))));
  const int rows = (px_per_level + cols - 1) / cols;
  CameraDesign cam;
  cam.pixel_um = 1.0;
  cam.sensor_w_mm = cols * n_levels / 1000.0;
  cam.sensor_h_mm = rows / 1000.0;
  cam.focal_mm = cam.sensor_w_mm;  // the 1 m target at 1 m spans the width exactly
  cam.exposure_ms = 30.0;
  cam.gain_db = 15.0;
  RenderOptions opt;
  opt.max_width = cols * n_levels;
  opt.max_height = rows;
  return render(target, Pose{}, cam, opt);
}

std::vector<BarStats> measure_colorbar_noise(const NoiseModel& model, std::uint64_t seed, int n_levels,
                                             int px_per_level, NoiseSampler sampler) {
  const Frame f = render_colorbar(n_levels, px_per_level);
  const ImageF noisy = synthesize(f.exposed, model, seed, sampler);
  const auto stats = label_statistics(noisy, f.semantic, n_levels);
  const auto clean = label_statistics(f.exposed, f.semantic, n_levels);
  if (stats.size() != static_cast<std::size_t>(n_levels)) throw InvariantViolation("colorbar bar missing from render");
  std::vector<BarStats> out;
  for (int k = 0; k < n_levels; ++k) {
    BarStats b;
    b.level = k;
    b.albedo = static_cast<double>(k) / (n_levels - 1);
    b.mean = stats[static_cast<std::size_t>(k)].mean;
    b.empirical_variance = stats[static_cast<std::size_t>(k)].variance;
    b.model_variance = variance_at(model, clean[static_cast<std::size_t>(k)].mean);
    out.push_back(b);
  }
  return out;
}

}  // namespace camforge
