#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace gapfolio::svg {

// Minimal static line-plot writer: axes, ticks, legend, one polyline per
// series. CSVs are the canonical output; these files exist for eyeballing.
struct Series {
    std::string label;
    std::vector<double> x, y;
    std::string color;   // empty: palette by index
    bool dashed = false;
};

struct PlotOptions {
    int width = 760;
    int height = 500;
    std::string title, x_label, y_label;
};

void write_line_plot(const std::filesystem::path& path, const PlotOptions& opt,
                     const std::vector<Series>& series);

}  // namespace gapfolio::svg
