// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace camforge::svg {

struct Series {
  std::string name;
  std::string color = "#1f77b4";
  std::vector<double> x;
  std::vector<double> y;
  bool line = true;     // polyline through the points
  bool markers = true;  // small circles at the points
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_y = false;
  std::vector<Series> series;
};

/// Self-contained SVG document. Numbers are printed with fixed precision so
/// identical inputs give identical bytes.
std::string render(const Chart& chart);

}  // namespace camforge::svg
