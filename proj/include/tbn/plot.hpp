#pragma once

#include <string>
#include <vector>

namespace tbn {

struct PlotSeries {
    std::string name;
    std::vector<double> y;
    std::vector<double> err;  ///< optional half-height of the shaded band
    std::string color = "#1f77b4";
};

/// Self-contained SVG line chart over categorical x positions.
std::string svg_line_chart(const std::string& title, const std::vector<std::string>& x_labels,
                           const std::vector<PlotSeries>& series, const std::string& y_label);

}  // namespace tbn
