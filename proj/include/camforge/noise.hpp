// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "camforge/image.hpp"

namespace camforge {

/// Affine noise model sigma^2 = sigma_p_sq * I + sigma_r_sq, valid at gain
/// g0_lin and pixel area pixel_area0_um2.
struct NoiseModel {
  double sigma_p_sq = 4e-4;
  double sigma_r_sq = 1e-5;
  double g0_lin = 5.623413251903491;  // 15 dB
  double pixel_area0_um2 = 1.55 * 1.55;

  friend bool operator==(const NoiseModel&, const NoiseModel&) = default;
};

/// Zero-noise model at the reference gain and pixel area.
inline NoiseModel noiseless_model() {
  NoiseModel m;
  m.sigma_p_sq = 0.0;
  m.sigma_r_sq = 0.0;
  return m;
}

double variance_at(const NoiseModel& model, double mean);

/// Rescale a model to gain `g_lin` on a pixel of `pixel_area_um2`. The
/// effective gain is g_lin * area0 / area. The result stores g_lin and the
/// new area as its reference point, so generalizing twice equals once.
NoiseModel generalize(const NoiseModel& model, double g_lin, double pixel_area_um2);

struct NoiseSample {
  double mean = 0.0;
  double variance = 0.0;
  friend bool operator==(const NoiseSample&, const NoiseSample&) = default;
};

struct Calibration {
  NoiseModel model;
  bool clamped = false;  // a fitted coefficient was negative and set to zero
  std::size_t used = 0;  // samples kept after the clip filter
};

inline constexpr double kCalibrationLow = 0.05;
inline constexpr double kCalibrationHigh = 0.95;

/// Weighted least-squares line fit of variance against mean. A first
/// ordinary fit supplies the weights 1 / sigma^4 of the second.
Calibration calibrate(std::span<const NoiseSample> samples, double g0_lin, double pixel_area0_um2);

enum class NoiseSampler { kGaussian, kPoissonGaussian };

/// Adds heteroscedastic noise to every channel independently and clips to [0, 1].
ImageF synthesize(const ImageF& exposed, const NoiseModel& model, std::uint64_t seed,
                  NoiseSampler sampler = NoiseSampler::kGaussian);

/// Per-label (mean, unbiased variance) over all channels of `image`, for
/// labels 1..n_labels. Labels without pixels are skipped.
std::vector<NoiseSample> label_statistics(const ImageF& image, const ImageI& labels, int n_labels);

std::vector<NoiseSample> read_samples_csv(const std::filesystem::path& path);
void write_samples_csv(const std::filesystem::path& path, std::span<const NoiseSample> samples);

/// Key-value file: sigma_p_sq, sigma_r_sq, g0_db, pixel_area_um2.
NoiseModel load_noise_model(const std::filesystem::path& path);
void save_noise_model(const NoiseModel& model, const std::filesystem::path& path);

}  // namespace camforge
