// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace camforge {

struct SensorEntry {
  std::string id;
  std::string manufacturer;
  double sensor_w_mm = 0.0;
  double sensor_h_mm = 0.0;
  double pixel_um = 0.0;

  std::array<double, 3> triplet() const { return {sensor_w_mm, sensor_h_mm, pixel_um}; }
  friend bool operator==(const SensorEntry&, const SensorEntry&) = default;
};

/// Ordered, validated sensor list with cached per-component ranges.
class SensorCatalog {
 public:
  SensorCatalog() = default;
  /// Throws InvariantViolation naming the offending id.
  explicit SensorCatalog(std::vector<SensorEntry> entries);

  const std::vector<SensorEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const SensorEntry& operator[](std::size_t i) const { return entries_[i]; }

  /// Component order (w, h, p).
  const std::array<double, 3>& lo() const noexcept { return lo_; }
  const std::array<double, 3>& hi() const noexcept { return hi_; }

  /// Index of `id`, or size() when absent.
  std::size_t find(const std::string& id) const;

 private:
  std::vector<SensorEntry> entries_;
  std::array<double, 3> lo_{};
  std::array<double, 3> hi_{};
};

/// CSV with header id,manufacturer,sensor_w_mm,sensor_h_mm,pixel_um; '#'
/// starts a comment line.
SensorCatalog load_catalog(const std::filesystem::path& path);

/// Catalog shipped in data/.
std::filesystem::path default_catalog_path();

/// Nearest entry by squared distance over (w, h, p). In normalized mode each
/// component is divided by the catalog's range first. Ties go to the lowest
/// index. Throws EmptyCatalog.
std::size_t snap_index(const SensorCatalog& catalog, double w_mm, double h_mm, double pixel_um,
                       bool normalized = false);

const SensorEntry& snap(const SensorCatalog& catalog, double w_mm, double h_mm, double pixel_um,
                        bool normalized = false);

}  // namespace camforge
