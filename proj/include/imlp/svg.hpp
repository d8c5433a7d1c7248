#pragma once

// Standalone vector figures built from scatter and polyline primitives
// only, so no plotting dependency is needed. Output formatting is fixed to
// keep figures byte-stable for identical inputs.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "imlp/common.hpp"
#include "imlp/csv.hpp"
#include "imlp/stats.hpp"

namespace imlp {

namespace detail {

inline std::string fmt_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace detail

/// Scatter of all points with the front drawn as a polyline over the unique
/// front vertices (duplicates collapse to one vertex). x = energy,
/// y = performance.
inline std::string scatter_front_svg(const std::vector<TradeoffPoint>& points,
                                     const std::vector<TradeoffPoint>& front, const std::string& x_label = "energy_j",
                                     const std::string& y_label = "performance") {
    if (points.empty()) throw data_error("scatter_front_svg: no points");
    const double width = 640.0, height = 480.0, margin = 56.0;

    double x_min = points[0].energy, x_max = points[0].energy;
    double y_min = points[0].performance, y_max = points[0].performance;
    for (const auto& p : points) {
        x_min = std::min(x_min, p.energy);
        x_max = std::max(x_max, p.energy);
        y_min = std::min(y_min, p.performance);
        y_max = std::max(y_max, p.performance);
    }
    if (x_max == x_min) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if (y_max == y_min) {
        y_min -= 0.5;
        y_max += 0.5;
    }
    const auto sx = [&](double x) { return margin + (x - x_min) / (x_max - x_min) * (width - 2 * margin); };
    const auto sy = [&](double y) { return height - margin - (y - y_min) / (y_max - y_min) * (height - 2 * margin); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::fmt_num(width) + "\" height=\"" +
           detail::fmt_num(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // axes
    svg += "<line x1=\"" + detail::fmt_num(margin) + "\" y1=\"" + detail::fmt_num(height - margin) + "\" x2=\"" +
           detail::fmt_num(width - margin) + "\" y2=\"" + detail::fmt_num(height - margin) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + detail::fmt_num(margin) + "\" y1=\"" + detail::fmt_num(margin) + "\" x2=\"" +
           detail::fmt_num(margin) + "\" y2=\"" + detail::fmt_num(height - margin) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + detail::fmt_num(width / 2) + "\" y=\"" + detail::fmt_num(height - 12.0) +
           "\" font-size=\"13\" text-anchor=\"middle\">" + x_label + "</text>\n";
    svg += "<text x=\"16\" y=\"" + detail::fmt_num(height / 2) + "\" font-size=\"13\" text-anchor=\"middle\" " +
           "transform=\"rotate(-90 16 " + detail::fmt_num(height / 2) + ")\">" + y_label + "</text>\n";
    svg += "<text x=\"" + detail::fmt_num(margin) + "\" y=\"" + detail::fmt_num(height - margin + 16.0) +
           "\" font-size=\"11\">" + detail::fmt_num(x_min) + "</text>\n";
    svg += "<text x=\"" + detail::fmt_num(width - margin) + "\" y=\"" + detail::fmt_num(height - margin + 16.0) +
           "\" font-size=\"11\" text-anchor=\"end\">" + detail::fmt_num(x_max) + "</text>\n";
    svg += "<text x=\"" + detail::fmt_num(margin - 6.0) + "\" y=\"" + detail::fmt_num(height - margin) +
           "\" font-size=\"11\" text-anchor=\"end\">" + detail::fmt_num(y_min) + "</text>\n";
    svg += "<text x=\"" + detail::fmt_num(margin - 6.0) + "\" y=\"" + detail::fmt_num(margin + 4.0) +
           "\" font-size=\"11\" text-anchor=\"end\">" + detail::fmt_num(y_max) + "</text>\n";

    // front polyline over unique vertices, ascending energy
    if (!front.empty()) {
        std::string pts;
        double last_e = std::numeric_limits<double>::quiet_NaN();
        for (const auto& p : front) {
            if (!pts.empty() && p.energy == last_e) continue;  // duplicates share a vertex
            pts += detail::fmt_num(sx(p.energy)) + "," + detail::fmt_num(sy(p.performance)) + " ";
            last_e = p.energy;
        }
        if (!pts.empty()) pts.pop_back();
        svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
    }

    for (const auto& p : points) {
        svg += "<circle cx=\"" + detail::fmt_num(sx(p.energy)) + "\" cy=\"" + detail::fmt_num(sy(p.performance)) +
               "\" r=\"3\" fill=\"#1f77b4\"><title>" + detail::xml_escape(p.label) + "</title></circle>\n";
    }
    svg += "</svg>\n";
    return svg;
}

inline void write_scatter_front_svg(const std::string& path, const std::vector<TradeoffPoint>& points,
                                    const std::vector<TradeoffPoint>& front) {
    write_text_file(path, scatter_front_svg(points, front));
}

}  // namespace imlp
