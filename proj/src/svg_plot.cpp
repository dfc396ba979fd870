#include "parade/svg_plot.hpp"

#include "parade/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace parade {

namespace {

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string render_line_plot_svg(const std::string& title, const std::string& x_label,
                                 const std::string& y_label,
                                 const std::vector<PlotSeries>& series) {
  const double width = 760, height = 460;
  const double left = 70, right = 20, top = 40, bottom = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (!std::isfinite(xmin)) {
    xmin = 0; xmax = 1; ymin = 0; ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
  auto sy = [&](double y) { return top + plot_h - (y - ymin) / (ymax - ymin) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << title << "</text>\n";
  svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
  // axis labels and extreme ticks
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
  svg << "<text x=\"18\" y=\"" << top + plot_h / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 18 "
      << top + plot_h / 2 << ")\">" << y_label << "</text>\n";
  svg << "<text x=\"" << left << "\" y=\"" << height - 30
      << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(xmin) << "</text>\n";
  svg << "<text x=\"" << left + plot_w << "\" y=\"" << height - 30
      << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(xmax) << "</text>\n";
  svg << "<text x=\"" << left - 8 << "\" y=\"" << top + plot_h
      << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(ymin) << "</text>\n";
  svg << "<text x=\"" << left - 8 << "\" y=\"" << top + 4
      << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(ymax) << "</text>\n";

  int color = 0;
  double legend_y = top + 14;
  for (const auto& s : series) {
    const char* stroke = kSeriesColors[color % 5];
    svg << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : s.points) svg << fmt(sx(x)) << ',' << fmt(sy(y)) << ' ';
    svg << "\"/>\n";
    if (!s.label.empty()) {
      svg << "<text x=\"" << left + plot_w - 6 << "\" y=\"" << legend_y
          << "\" text-anchor=\"end\" font-size=\"11\" fill=\"" << stroke << "\">" << s.label
          << "</text>\n";
      legend_y += 14;
    }
    ++color;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::pair<double, double>> read_csv_columns(const std::string& path,
                                                        const std::string& x_column,
                                                        const std::string& y_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty CSV");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(s);
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    return cells;
  };
  const auto header = split(line);
  int xi = -1, yi = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == x_column) xi = static_cast<int>(i);
    if (header[i] == y_column) yi = static_cast<int>(i);
  }
  if (xi < 0 || yi < 0)
    throw DataError(path + ": CSV lacks columns " + x_column + "/" + y_column);
  std::vector<std::pair<double, double>> points;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) <= std::max(xi, yi))
      throw DataError(path + ":" + std::to_string(line_no) + ": short row");
    try {
      points.emplace_back(std::stod(cells[static_cast<std::size_t>(xi)]),
                          std::stod(cells[static_cast<std::size_t>(yi)]));
    } catch (const std::exception&) {
      throw DataError(path + ":" + std::to_string(line_no) + ": non-numeric cell");
    }
  }
  return points;
}

}  // namespace parade
