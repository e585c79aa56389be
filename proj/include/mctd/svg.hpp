#pragma once

#include <string>
#include <vector>

// Deterministic SVG charts written directly, so renders golden-file cleanly.

namespace mctd {

struct BarDatum {
    std::string label;
    double value = 0.0;
    double err = 0.0;
};

struct LineSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

std::string svg_bar_chart(const std::vector<BarDatum>& bars, const std::string& title,
                          const std::string& y_label, double y_max = 0.0);

// Panels stacked vertically, shared x values per series.
std::string svg_line_panels(const std::vector<std::vector<LineSeries>>& panels,
                            const std::vector<std::string>& panel_titles,
                            const std::string& x_label);

std::string svg_histogram(const std::vector<double>& values, int bins,
                          const std::string& title);

std::string svg_placeholder(const std::string& message);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace mctd
