// SPDX-License-Identifier: Apache-2.0
#include "camforge/catalog.hpp"

#include <algorithm>
#include <set>

#include "camforge/error.hpp"
#include "text_io.hpp"

#ifndef CAMFORGE_DATA_DIR
#define CAMFORGE_DATA_DIR "data"
#endif

namespace camforge {

SensorCatalog::SensorCatalog(std::vector<SensorEntry> entries) : entries_(std::move(entries)) {
  std::set<std::string> ids;
  for (const SensorEntry& e : entries_) {
    if (!(e.sensor_w_mm > 0.0 && e.sensor_h_mm > 0.0 && e.pixel_um > 0.0))
      throw InvariantViolation("sensor " + e.id + ": dimensions must be positive");
    if (e.pixel_um > 1000.0 * std::min(e.sensor_w_mm, e.sensor_h_mm))
      throw InvariantViolation("sensor " + e.id + ": pixel larger than the sensor");
    if (!ids.insert(e.id).second) throw InvariantViolation("sensor " + e.id + ": duplicate id");
  }
  if (entries_.empty()) return;
  lo_ = hi_ = entries_.front().triplet();
  for (const SensorEntry& e : entries_) {
    const auto t = e.triplet();
    for (std::size_t k = 0; k < 3; ++k) {
      lo_[k] = std::min(lo_[k], t[k]);
      hi_[k] = std::max(hi_[k], t[k]);
    }
  }
}

std::size_t SensorCatalog::find(const std::string& id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].id == id) return i;
  return entries_.size();
}

SensorCatalog load_catalog(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("catalog not found: " + path.string());
  std::vector<SensorEntry> entries;
  bool header = false;
  for (const auto& row : detail::read_csv_rows(path)) {
    if (!header) {
      const std::vector<std::string> expected = {"id", "manufacturer", "sensor_w_mm", "sensor_h_mm", "pixel_um"};
      if (row.cells != expected) throw ParseError("expected header " + std::string("id,manufacturer,sensor_w_mm,sensor_h_mm,pixel_um"), row.line);
      header = true;
      continue;
    }
    if (row.cells.size() != 5) throw ParseError("expected 5 fields", row.line);
    SensorEntry e;
    e.id = row.cells[0];
    e.manufacturer = row.cells[1];
    if (e.id.empty() || !detail::parse_double(row.cells[2], e.sensor_w_mm) ||
        !detail::parse_double(row.cells[3], e.sensor_h_mm) || !detail::parse_double(row.cells[4], e.pixel_um))
      throw ParseError("malformed sensor row", row.line);
    entries.push_back(std::move(e));
  }
  if (!header) throw ParseError("missing header", 1);
  return SensorCatalog(std::move(entries));
}

std::filesystem::path default_catalog_path() {
  return std::filesystem::path(CAMFORGE_DATA_DIR) / "sensors.csv";
}

std::size_t snap_index(const SensorCatalog& catalog, double w_mm, double h_mm, double pixel_um, bool normalized) {
  if (catalog.empty()) throw EmptyCatalog("cannot snap against an empty catalog");
  if (!(w_mm > 0.0 && h_mm > 0.0 && pixel_um > 0.0)) throw PreconditionError("snap inputs must be positive");
  std::array<double, 3> scale{1.0, 1.0, 1.0};
  if (normalized)
    for (std::size_t k = 0; k < 3; ++k) {
      const double r = catalog.hi()[k] - catalog.lo()[k];
      scale[k] = r > 0.0 ? 1.0 / r : 1.0;
    }
  const std::array<double, 3> q{w_mm, h_mm, pixel_um};
  std::size_t best = 0;
  double best_d = 0.0;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto t = catalog[i].triplet();
    double d = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double diff = (q[k] - t[k]) * scale[k];
      d += diff * diff;
    }
    if (i == 0 || d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

const SensorEntry& snap(const SensorCatalog& catalog, double w_mm, double h_mm, double pixel_um, bool normalized) {
  return catalog[snap_index(catalog, w_mm, h_mm, pixel_um, normalized)];
}

}  // namespace camforge
