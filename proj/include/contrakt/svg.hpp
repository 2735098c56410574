#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace contrakt {

// Minimal SVG line-plot writer for the CLI artifacts. Layout is plain
// and not pixel-pinned; the data polylines carry the actual content.

struct SvgSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

inline void write_svg_plot(std::ostream& out, const std::string& title,
                           const std::string& x_label, const std::string& y_label,
                           std::span<const SvgSeries> series) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    const int width = 720, height = 480;
    const int ml = 70, mr = 20, mt = 40, mb = 50;

    double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
    double y_min = x_min, y_max = -x_min;
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
            x_min = std::min(x_min, s.x[k]);
            x_max = std::max(x_max, s.x[k]);
            y_min = std::min(y_min, s.y[k]);
            y_max = std::max(y_max, s.y[k]);
        }
    if (!(x_min < x_max)) {
        x_min -= 1.0;
        x_max += 1.0;
    }
    if (!(y_min < y_max)) {
        y_min -= 1.0;
        y_max += 1.0;
    }

    auto px = [&](double x) {
        return ml + (x - x_min) / (x_max - x_min) * (width - ml - mr);
    };
    auto py = [&](double y) {
        return height - mb - (y - y_min) / (y_max - y_min) * (height - mt - mb);
    };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v);
        return std::string(buf);
    };

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << (width - ml - mr)
        << "\" height=\"" << (height - mt - mb)
        << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";

    for (int i = 0; i <= 4; ++i) {
        const double xv = x_min + (x_max - x_min) * i / 4.0;
        const double yv = y_min + (y_max - y_min) * i / 4.0;
        out << "<text x=\"" << px(xv) << "\" y=\"" << height - mb + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << num(xv) << "</text>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << py(yv) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << num(yv) << "</text>\n";
        if (i > 0 && i < 4) {
            out << "<line x1=\"" << px(xv) << "\" y1=\"" << mt << "\" x2=\"" << px(xv)
                << "\" y2=\"" << height - mb
                << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
            out << "<line x1=\"" << ml << "\" y1=\"" << py(yv) << "\" x2=\"" << width - mr
                << "\" y2=\"" << py(yv) << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
        }
    }
    out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
    out << "<text x=\"16\" y=\"" << (mt + height - mb) / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
        << (mt + height - mb) / 2 << ")\">" << y_label << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = palette[s % (sizeof palette / sizeof palette[0])];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.3\" points=\"";
        for (std::size_t k = 0; k < series[s].x.size(); ++k) {
            if (!std::isfinite(series[s].x[k]) || !std::isfinite(series[s].y[k])) continue;
            out << px(series[s].x[k]) << "," << py(series[s].y[k]) << " ";
        }
        out << "\"/>\n";
        out << "<text x=\"" << width - mr - 8 << "\" y=\"" << mt + 16 + 16 * s
            << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color << "\">"
            << series[s].label << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace contrakt
