#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace biasaudit {

// Minimal SVG chart emitters for the plot-producing CLI paths. Values render
// left to right in the order given.

struct LabeledValue {
    std::string label;
    double value = 0.0;
};

// Horizontal bar chart (bias ranking style). Values are expected in [0, 1].
std::string svg_bar_chart(const std::string& title, const std::vector<LabeledValue>& bars);

// Line chart with point markers (interval-ablation style). One polyline per
// series; x labels shared.
struct LineSeries {
    std::string name;
    std::vector<double> values;
};
std::string svg_line_chart(const std::string& title, const std::vector<std::string>& x_labels,
                           const std::vector<LineSeries>& series, double y_min = 0.0,
                           double y_max = 100.0);

void write_svg(const std::filesystem::path& path, const std::string& svg);

}  // namespace biasaudit
