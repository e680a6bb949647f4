// SPDX-License-Identifier: Apache-2.0
#include "camforge/noise.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "camforge/error.hpp"
#include "camforge/rng.hpp"
#include "text_io.hpp"

namespace camforge {

namespace {

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
  bool clamped = false;
};

Line weighted_fit(const std::vector<NoiseSample>& s, const std::vector<double>& w) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    sw += w[i];
    sx += w[i] * s[i].mean;
    sy += w[i] * s[i].variance;
    sxx += w[i] * s[i].mean * s[i].mean;
    sxy += w[i] * s[i].mean * s[i].variance;
  }
  const double det = sw * sxx - sx * sx;
  Line l;
  l.slope = (sw * sxy - sx * sy) / det;
  l.intercept = (sxx * sy - sx * sxy) / det;
  if (l.slope < 0.0) {
    l.slope = 0.0;
    l.intercept = sy / sw;
    l.clamped = true;
  }
  if (l.intercept < 0.0) {
    l.intercept = 0.0;
    l.slope = std::max(0.0, sxy / sxx);
    l.clamped = true;
  }
  return l;
}

}  // namespace

double variance_at(const NoiseModel& model, double mean) {
  return model.sigma_p_sq * mean + model.sigma_r_sq;
}

NoiseModel generalize(const NoiseModel& model, double g_lin, double pixel_area_um2) {
  if (!(g_lin > 0.0) || !(pixel_area_um2 > 0.0))
    throw PreconditionError("gain and pixel area must be positive");
  const double g_eff = g_lin * model.pixel_area0_um2 / pixel_area_um2;
  const double r = g_eff / model.g0_lin;
  NoiseModel out;
  out.sigma_p_sq = r * model.sigma_p_sq;
  out.sigma_r_sq = r * r * model.sigma_r_sq;
  // Storing the raw gain (not g_eff) next to the new area keeps repeated
  // generalization equal to a single one from the original model.
  out.g0_lin = g_lin;
  out.pixel_area0_um2 = pixel_area_um2;
  return out;
}

Calibration calibrate(std::span<const NoiseSample> samples, double g0_lin, double pixel_area0_um2) {
  if (samples.size() < 2) throw InsufficientData("calibration needs at least two samples");
  if (!(g0_lin > 0.0) || !(pixel_area0_um2 > 0.0))
    throw PreconditionError("reference gain and pixel area must be positive");
  std::vector<NoiseSample> kept;
  for (const NoiseSample& s : samples) {
    if (!(s.mean >= 0.0 && s.mean <= 1.0) || !std::isfinite(s.variance))
      throw PreconditionError("sample means must lie in [0, 1]");
    if (s.mean >= kCalibrationLow && s.mean <= kCalibrationHigh) kept.push_back(s);
  }
  if (kept.empty()) throw AllClipped("every sample lies in a near-clip band");
  std::set<double> distinct;
  for (const NoiseSample& s : kept) distinct.insert(s.mean);
  if (distinct.size() < 2) throw InsufficientData("need two distinct unclipped means");

  std::vector<double> w(kept.size(), 1.0);
  const Line first = weighted_fit(kept, w);
  bool positive = true;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const double pred = first.slope * kept[i].mean + first.intercept;
    positive = positive && pred > 0.0;
    w[i] = pred > 0.0 ? 1.0 / (pred * pred) : 1.0;
  }
  const Line line = positive ? weighted_fit(kept, w) : first;

  Calibration out;
  out.model.sigma_p_sq = line.slope;
  out.model.sigma_r_sq = line.intercept;
  out.model.g0_lin = g0_lin;
  out.model.pixel_area0_um2 = pixel_area0_um2;
  out.clamped = line.clamped || (!positive && first.clamped);
  out.used = kept.size();
  if (out.clamped) spdlog::warn("noise calibration clamped a negative coefficient to zero");
  return out;
}

ImageF synthesize(const ImageF& exposed, const NoiseModel& model, std::uint64_t seed, NoiseSampler sampler) {
  ImageF out = exposed;
  if (model.sigma_p_sq == 0.0 && model.sigma_r_sq == 0.0) return out;
  Rng rng(derive_seed(seed, Purpose::kNoise, {}));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sigma_r = std::sqrt(model.sigma_r_sq);
  for (double& v : out.data()) {
    if (!(v >= 0.0 && v <= 1.0)) throw PreconditionError("synthesize expects an image in [0, 1]");
    double noisy;
    if (sampler == NoiseSampler::kPoissonGaussian && model.sigma_p_sq > 0.0) {
      std::poisson_distribution<long long> photons(v / model.sigma_p_sq);
      noisy = model.sigma_p_sq * static_cast<double>(v > 0.0 ? photons(rng) : 0) + sigma_r * normal(rng);
    } else {
      noisy = v + std::sqrt(variance_at(model, v)) * normal(rng);
    }
    v = std::clamp(noisy, 0.0, 1.0);
  }
  return out;
}

std::vector<NoiseSample> label_statistics(const ImageF& image, const ImageI& labels, int n_labels) {
  if (image.width() != labels.width() || image.height() != labels.height())
    throw ImagesMismatch("image and label map differ in size");
  std::vector<double> n(static_cast<std::size_t>(n_labels) + 1, 0.0);
  std::vector<double> sum(n.size(), 0.0);
  std::vector<double> sum_sq(n.size(), 0.0);
  // Two passes: means first, then centered squares.
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const int l = labels.at(x, y);
      if (l < 1 || l > n_labels) continue;
      for (int c = 0; c < image.channels(); ++c) {
        n[static_cast<std::size_t>(l)] += 1.0;
        sum[static_cast<std::size_t>(l)] += image.at(x, y, c);
      }
    }
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      const int l = labels.at(x, y);
      if (l < 1 || l > n_labels) continue;
      const double mean = sum[static_cast<std::size_t>(l)] / n[static_cast<std::size_t>(l)];
      for (int c = 0; c < image.channels(); ++c) {
        const double d = image.at(x, y, c) - mean;
        sum_sq[static_cast<std::size_t>(l)] += d * d;
      }
    }
  std::vector<NoiseSample> out;
  for (std::size_t l = 1; l < n.size(); ++l) {
    if (n[l] < 2.0) continue;
    out.push_back({sum[l] / n[l], sum_sq[l] / (n[l] - 1.0)});
  }
  return out;
}

std::vector<NoiseSample> read_samples_csv(const std::filesystem::path& path) {
  std::vector<NoiseSample> out;
  for (const auto& row : detail::read_csv_rows(path)) {
    if (row.cells.size() >= 2 && row.cells[0] == "mean") continue;  // header
    NoiseSample s;
    if (row.cells.size() < 2 || !detail::parse_double(row.cells[0], s.mean) ||
        !detail::parse_double(row.cells[1], s.variance))
      throw ParseError("expected 'mean,variance'", row.line);
    out.push_back(s);
  }
  return out;
}

void write_samples_csv(const std::filesystem::path& path, std::span<const NoiseSample> samples) {
  auto os = detail::open_for_write(path);
  os << "mean,variance\n";
  for (const NoiseSample& s : samples) os << fmt::format("{:.17g},{:.17g}\n", s.mean, s.variance);
}

NoiseModel load_noise_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("noise model not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
    NoiseModel m;
    m.sigma_p_sq = tree.get<double>("sigma_p_sq");
    m.sigma_r_sq = tree.get<double>("sigma_r_sq");
    m.g0_lin = std::pow(10.0, tree.get<double>("g0_db") / 20.0);
    m.pixel_area0_um2 = tree.get<double>("pixel_area_um2");
    if (m.sigma_p_sq < 0.0 || m.sigma_r_sq < 0.0 || !(m.pixel_area0_um2 > 0.0))
      throw ConfigError("noise model coefficients out of range in " + path.string());
    return m;
  } catch (const boost::property_tree::ptree_error& e) {
    throw ConfigError("bad noise model " + path.string() + ": " + e.what());
  }
}

void save_noise_model(const NoiseModel& model, const std::filesystem::path& path) {
  auto os = detail::open_for_write(path);
  os << fmt::format("sigma_p_sq = {:.17g}\n", model.sigma_p_sq);
  os << fmt::format("sigma_r_sq = {:.17g}\n", model.sigma_r_sq);
  os << fmt::format("g0_db = {:.17g}\n", 20.0 * std::log10(model.g0_lin));
  os << fmt::format("pixel_area_um2 = {:.17g}\n", model.pixel_area0_um2);
}

}  // namespace camforge
