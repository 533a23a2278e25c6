#pragma once

#include <string>
#include <vector>

namespace odegrad {

enum class PlotKind { Line, Scatter, Heatmap };

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> v;  // cell values, heatmaps only
};

struct PlotOptions {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = false;
  bool logy = false;
};

// Self-contained SVG 1.1 document, 640x480 viewBox, axes with tick labels.
// Throws std::invalid_argument on an empty series list or non-positive data
// on a log-scaled axis.
void emit_svg(const std::vector<Series>& series, PlotKind kind, const std::string& path,
              const PlotOptions& opts = {});

}  // namespace odegrad
