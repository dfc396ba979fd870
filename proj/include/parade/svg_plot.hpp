#pragma once

#include <string>
#include <utility>
#include <vector>

namespace parade {

struct PlotSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

// Minimal deterministic SVG line plot; enough for loss and metric traces.
std::string render_line_plot_svg(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::vector<PlotSeries>& series);

// Reads a CSV with a header row and returns (x, y) pairs for two named
// columns.
std::vector<std::pair<double, double>> read_csv_columns(const std::string& path,
                                                        const std::string& x_column,
                                                        const std::string& y_column);

}  // namespace parade
