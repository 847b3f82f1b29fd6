#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace rf2sa {

/// Minimal self-contained SVG line plots (no external plotting dependency).
struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

struct LinePlot {
  std::string title, x_label, y_label;
  bool log_x = false, log_y = false;
  std::vector<PlotSeries> series;
};

void write_svg(const std::filesystem::path& path, const LinePlot& plot);

}  // namespace rf2sa
