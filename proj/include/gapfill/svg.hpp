#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace gapfill::svg {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    /// Widened by 5% per side, and made non-degenerate.
    Range padded() const {
        if (!(lo <= hi)) return {0.0, 1.0};
        const double span = hi > lo ? hi - lo : std::max(1.0, std::abs(lo));
        return {lo - 0.05 * span, hi + 0.05 * span};
    }
};

struct Series {
    std::string label;
    std::string color;
    std::vector<std::pair<double, double>> points;  // NaN y breaks the line
};

/// Multi-series line chart; x is a plain numeric axis (e.g. row index).
inline std::string line_chart(const std::string& title, const std::vector<Series>& series,
                              const std::string& x_label, const std::string& y_label) {
    const double width = 800, height = 400, left = 70, right = 20, top = 40, bottom = 50;
    Range xr, yr;
    for (const auto& s : series)
        for (const auto& [x, y] : s.points) {
            xr.add(x);
            yr.add(y);
        }
    xr = xr.padded();
    yr = yr.padded();
    auto sx = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * (width - left - right); };
    auto sy = [&](double y) { return height - bottom - (y - yr.lo) / (yr.hi - yr.lo) * (height - top - bottom); };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << escape(title)
        << "</text>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
        << height - bottom << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = yr.lo + (yr.hi - yr.lo) * i / 4.0;
        out << "<text x=\"" << left - 6 << "\" y=\"" << fmt(sy(yv) + 4) << "\" text-anchor=\"end\" font-size=\"11\">"
            << fmt(yv) << "</text>\n";
    }
    out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
        << escape(x_label) << "</text>\n";
    out << "<text x=\"16\" y=\"" << height / 2 << "\" transform=\"rotate(-90 16 " << height / 2
        << ")\" text-anchor=\"middle\" font-size=\"12\">" << escape(y_label) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        std::string path;
        bool pen = false;
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(y)) {
                pen = false;
                continue;
            }
            path += (pen ? " L" : " M") + fmt(sx(x)) + ' ' + fmt(sy(y));
            pen = true;
        }
        out << "<path d=\"" << path << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"/>\n";
        const double ly = top + 14.0 * static_cast<double>(k);
        out << "<line x1=\"" << width - right - 150 << "\" y1=\"" << ly << "\" x2=\"" << width - right - 130
            << "\" y2=\"" << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << width - right - 125 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << escape(s.label)
            << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

/// Square truth-vs-prediction scatter with identical axes and the y = x diagonal.
inline std::string scatter(const std::string& title, const std::vector<double>& truth,
                           const std::vector<double>& prediction) {
    const double size = 420, margin = 60;
    Range r;
    for (double v : truth) r.add(v);
    for (double v : prediction) r.add(v);
    r = r.padded();
    const double plot = size - 2 * margin;
    auto sx = [&](double v) { return margin + (v - r.lo) / (r.hi - r.lo) * plot; };
    auto sy = [&](double v) { return size - margin - (v - r.lo) / (r.hi - r.lo) * plot; };

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
        << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << size / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
        << "</text>\n";
    out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot << "\" height=\"" << plot
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<line class=\"diagonal\" x1=\"" << fmt(sx(r.lo)) << "\" y1=\"" << fmt(sy(r.lo)) << "\" x2=\""
        << fmt(sx(r.hi)) << "\" y2=\"" << fmt(sy(r.hi)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    out << "<text x=\"" << size / 2 << "\" y=\"" << size - 20 << "\" text-anchor=\"middle\" font-size=\"12\">truth "
        << fmt(r.lo) << " .. " << fmt(r.hi) << "</text>\n";
    out << "<text x=\"16\" y=\"" << size / 2 << "\" transform=\"rotate(-90 16 " << size / 2
        << ")\" text-anchor=\"middle\" font-size=\"12\">prediction</text>\n";
    for (std::size_t i = 0; i < truth.size() && i < prediction.size(); ++i) {
        out << "<circle cx=\"" << fmt(sx(truth[i])) << "\" cy=\"" << fmt(sy(prediction[i]))
            << "\" r=\"2.5\" fill=\"steelblue\" fill-opacity=\"0.7\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace gapfill::svg
