#include "mctd/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mctd {

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

void header(std::ostringstream& out, int width, int height) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
}

void text(std::ostringstream& out, double x, double y, const std::string& s, int size,
          const char* anchor = "middle") {
    out << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" font-family=\"sans-serif\""
        << " font-size=\"" << size << "\" text-anchor=\"" << anchor << "\">" << s
        << "</text>\n";
}

}  // namespace

std::string svg_bar_chart(const std::vector<BarDatum>& bars, const std::string& title,
                          const std::string& y_label, double y_max) {
    if (bars.empty()) {
        return svg_placeholder("no data: " + title);
    }
    const int width = 640;
    const int height = 400;
    const double left = 70, right = 20, top = 50, bottom = 70;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double vmax = y_max;
    if (vmax <= 0.0) {
        for (const BarDatum& b : bars) {
            vmax = std::max(vmax, b.value + b.err);
        }
        if (vmax <= 0.0) {
            vmax = 1.0;
        }
        vmax *= 1.1;
    }

    std::ostringstream out;
    header(out, width, height);
    text(out, width / 2.0, 28, title, 16);
    text(out, 18, top + plot_h / 2, y_label, 12);

    out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + plot_h) << "\" x2=\""
        << fmt(left + plot_w) << "\" y2=\"" << fmt(top + plot_h)
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left)
        << "\" y2=\"" << fmt(top + plot_h) << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = vmax * tick / 4.0;
        const double y = top + plot_h - plot_h * tick / 4.0;
        text(out, left - 8, y + 4, fmt(v), 11, "end");
        out << "<line x1=\"" << fmt(left - 4) << "\" y1=\"" << fmt(y) << "\" x2=\""
            << fmt(left) << "\" y2=\"" << fmt(y) << "\" stroke=\"black\"/>\n";
    }

    const double slot = plot_w / bars.size();
    const double bar_w = slot * 0.6;
    for (std::size_t i = 0; i < bars.size(); ++i) {
        const BarDatum& b = bars[i];
        const double x = left + slot * i + (slot - bar_w) / 2;
        const double h = plot_h * std::clamp(b.value / vmax, 0.0, 1.0);
        const double y = top + plot_h - h;
        out << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y) << "\" width=\"" << fmt(bar_w)
            << "\" height=\"" << fmt(h) << "\" fill=\""
            << kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))] << "\"/>\n";
        if (b.err > 0.0) {
            const double cx = x + bar_w / 2;
            const double e = plot_h * std::clamp(b.err / vmax, 0.0, 1.0);
            out << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(std::max(top, y - e))
                << "\" x2=\"" << fmt(cx) << "\" y2=\""
                << fmt(std::min(top + plot_h, y + e)) << "\" stroke=\"black\"/>\n";
        }
        text(out, x + bar_w / 2, top + plot_h + 16, b.label, 11);
        text(out, x + bar_w / 2, y - 5, fmt(b.value), 10);
    }
    out << "</svg>\n";
    return out.str();
}

std::string svg_line_panels(const std::vector<std::vector<LineSeries>>& panels,
                            const std::vector<std::string>& panel_titles,
                            const std::string& x_label) {
    bool any = false;
    for (const auto& panel : panels) {
        for (const auto& series : panel) {
            if (!series.x.empty()) {
                any = true;
            }
        }
    }
    if (!any) {
        return svg_placeholder("no data");
    }
    const int width = 640;
    const int panel_h = 280;
    const int height = panel_h * static_cast<int>(panels.size()) + 30;
    const double left = 70, right = 150, top_pad = 40, bottom_pad = 50;

    std::ostringstream out;
    header(out, width, height);
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const double top = panel_h * static_cast<double>(p) + top_pad;
        const double plot_h = panel_h - top_pad - bottom_pad + 20;
        const double plot_w = width - left - right;
        double xmin = 1e300, xmax = -1e300, ymin = 0.0, ymax = -1e300;
        for (const LineSeries& s : panels[p]) {
            for (double v : s.x) {
                xmin = std::min(xmin, v);
                xmax = std::max(xmax, v);
            }
            for (double v : s.y) {
                ymax = std::max(ymax, v);
            }
        }
        if (xmax <= xmin) {
            xmax = xmin + 1.0;
        }
        if (ymax <= ymin) {
            ymax = ymin + 1.0;
        }
        ymax *= 1.1;
        auto sx = [&](double v) { return left + plot_w * (v - xmin) / (xmax - xmin); };
        auto sy = [&](double v) { return top + plot_h - plot_h * (v - ymin) / (ymax - ymin); };

        if (p < panel_titles.size()) {
            text(out, width / 2.0, top - 16, panel_titles[p], 14);
        }
        out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + plot_h) << "\" x2=\""
            << fmt(left + plot_w) << "\" y2=\"" << fmt(top + plot_h)
            << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\""
            << fmt(left) << "\" y2=\"" << fmt(top + plot_h) << "\" stroke=\"black\"/>\n";
        for (int tick = 0; tick <= 4; ++tick) {
            const double vy = ymin + (ymax - ymin) * tick / 4.0;
            text(out, left - 8, sy(vy) + 4, fmt(vy), 10, "end");
            const double vx = xmin + (xmax - xmin) * tick / 4.0;
            text(out, sx(vx), top + plot_h + 16, fmt(vx), 10);
        }
        text(out, left + plot_w / 2, top + plot_h + 34, x_label, 11);

        for (std::size_t s = 0; s < panels[p].size(); ++s) {
            const LineSeries& series = panels[p][s];
            const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
            for (std::size_t i = 0; i < series.x.size(); ++i) {
                if (i) {
                    out << ' ';
                }
                out << fmt(sx(series.x[i])) << ',' << fmt(sy(series.y[i]));
            }
            out << "\"/>\n";
            for (std::size_t i = 0; i < series.x.size(); ++i) {
                out << "<circle cx=\"" << fmt(sx(series.x[i])) << "\" cy=\""
                    << fmt(sy(series.y[i])) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
            }
            text(out, left + plot_w + 10, top + 14 + 16 * static_cast<double>(s),
                 series.name, 11, "start");
            out << "<line x1=\"" << fmt(left + plot_w + 90) << "\" y1=\""
                << fmt(top + 10 + 16 * static_cast<double>(s)) << "\" x2=\""
                << fmt(left + plot_w + 130) << "\" y2=\""
                << fmt(top + 10 + 16 * static_cast<double>(s)) << "\" stroke=\"" << color
                << "\" stroke-width=\"2\"/>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

std::string svg_histogram(const std::vector<double>& values, int bins,
                          const std::string& title) {
    if (values.empty() || bins < 1) {
        return svg_placeholder("no data: " + title);
    }
    double vmin = values[0], vmax = values[0];
    for (double v : values) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    if (vmax <= vmin) {
        vmax = vmin + 1.0;
    }
    std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
        int b = static_cast<int>((v - vmin) / (vmax - vmin) * bins);
        b = std::clamp(b, 0, bins - 1);
        counts[static_cast<std::size_t>(b)] += 1.0;
    }
    std::vector<BarDatum> bars;
    for (int b = 0; b < bins; ++b) {
        const double lo = vmin + (vmax - vmin) * b / bins;
        bars.push_back({fmt(lo), counts[static_cast<std::size_t>(b)], 0.0});
    }
    return svg_bar_chart(bars, title, "count");
}

std::string svg_placeholder(const std::string& message) {
    std::ostringstream out;
    header(out, 400, 120);
    text(out, 200, 64, message, 14);
    out << "</svg>\n";
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write file: " + path);
    }
    out << content;
}

}  // namespace mctd
