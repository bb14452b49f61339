#pragma once

#include <string>
#include <vector>

namespace admplan::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

/// Renders a multi-series line chart (axes, ticks, legend) as a standalone
/// SVG document. Non-finite points are dropped. Output is a deterministic
/// function of the input.
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       int width = 640, int height = 400);

}  // namespace admplan::svg
