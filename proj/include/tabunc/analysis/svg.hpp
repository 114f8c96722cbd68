#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "tabunc/core/error.hpp"
#include "tabunc/core/matrix.hpp"

namespace tabunc::svg {

struct Series {
    std::string label;
    std::vector<double> y;
    std::string color = "#1f77b4";
    bool right_axis = false;
};

struct ChartOptions {
    std::string title;
    std::string x_label;
    std::string left_label;
    std::string right_label;
    int width = 720;
    int height = 420;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = 0.0, hi = 1.0;
};

inline Range range_of(const std::vector<const Series*>& series) {
    Range r{INFINITY, -INFINITY};
    for (const auto* s : series)
        for (double v : s->y)
            if (std::isfinite(v)) r.lo = std::min(r.lo, v), r.hi = std::max(r.hi, v);
    if (!std::isfinite(r.lo)) return {0.0, 1.0};
    if (r.hi - r.lo < 1e-12) r.lo -= 0.5, r.hi += 0.5;
    const double pad = 0.05 * (r.hi - r.lo);
    return {r.lo - pad, r.hi + pad};
}

} // namespace detail

// Line chart over x = 0..n-1 with series on a left and optionally a right
// vertical axis.
inline std::string line_chart(const std::vector<Series>& series, const ChartOptions& opt,
                              const std::vector<double>& x = {}) {
    if (series.empty()) throw UsageError("line_chart: no series");
    const std::size_t n = series.front().y.size();
    for (const auto& s : series)
        if (s.y.size() != n) throw DimensionError("line_chart: series '" + s.label + "' has a different length");
    if (!x.empty() && x.size() != n) throw DimensionError("line_chart: x has a different length");
    const double left = 70, right = opt.width - 70.0, top = 40, bottom = opt.height - 50.0;
    std::vector<const Series*> ls, rs;
    for (const auto& s : series) (s.right_axis ? rs : ls).push_back(&s);
    const auto lr = detail::range_of(ls.empty() ? rs : ls);
    const auto rr = detail::range_of(rs.empty() ? ls : rs);
    const double x0 = x.empty() ? 0.0 : x.front();
    const double x1 = x.empty() ? double(std::max<std::size_t>(n, 2) - 1) : x.back();
    auto px = [&](std::size_t i) {
        const double xv = x.empty() ? double(i) : x[i];
        return left + (xv - x0) / (x1 - x0 == 0.0 ? 1.0 : x1 - x0) * (right - left);
    };
    auto py = [&](double v, const detail::Range& r) { return bottom - (v - r.lo) / (r.hi - r.lo) * (bottom - top); };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::escape(opt.title) << "</text>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << right << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << bottom
      << "\" stroke=\"black\"/>\n";
    if (!rs.empty()) {
        o << "<line x1=\"" << right << "\" y1=\"" << top << "\" x2=\"" << right << "\" y2=\"" << bottom
          << "\" stroke=\"black\"/>\n";
    }
    for (int t = 0; t <= 4; ++t) {
        const double f = t / 4.0;
        const double yv = bottom - f * (bottom - top);
        o << "<text x=\"" << left - 6 << "\" y=\"" << detail::num(yv + 4) << "\" text-anchor=\"end\">"
          << detail::tick(lr.lo + f * (lr.hi - lr.lo)) << "</text>\n";
        if (!rs.empty()) {
            o << "<text x=\"" << right + 6 << "\" y=\"" << detail::num(yv + 4) << "\">"
              << detail::tick(rr.lo + f * (rr.hi - rr.lo)) << "</text>\n";
        }
        const double xv = left + f * (right - left);
        o << "<text x=\"" << detail::num(xv) << "\" y=\"" << bottom + 16 << "\" text-anchor=\"middle\">"
          << detail::tick(x0 + f * (x1 - x0)) << "</text>\n";
    }
    if (ls.size() && lr.lo < 0.0 && lr.hi > 0.0) {
        o << "<line x1=\"" << left << "\" y1=\"" << detail::num(py(0.0, lr)) << "\" x2=\"" << right << "\" y2=\""
          << detail::num(py(0.0, lr)) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    }
    o << "<text x=\"" << (left + right) / 2 << "\" y=\"" << opt.height - 12 << "\" text-anchor=\"middle\">"
      << detail::escape(opt.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << (top + bottom) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::escape(opt.left_label) << "</text>\n";
    if (!rs.empty()) {
        o << "<text transform=\"translate(" << opt.width - 10 << "," << (top + bottom) / 2
          << ") rotate(90)\" text-anchor=\"middle\">" << detail::escape(opt.right_label) << "</text>\n";
    }
    // decimate long series to at most ~2000 points per polyline
    const std::size_t stride = std::max<std::size_t>(1, n / 2000);
    int legend_y = int(top) + 4;
    for (const auto& s : series) {
        const auto& r = s.right_axis ? rr : lr;
        o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < n; i += stride) {
            if (std::isfinite(s.y[i])) o << detail::num(px(i)) << "," << detail::num(py(s.y[i], r)) << " ";
        }
        if (n && (n - 1) % stride) o << detail::num(px(n - 1)) << "," << detail::num(py(s.y[n - 1], r));
        o << "\"/>\n";
        o << "<rect x=\"" << left + 10 << "\" y=\"" << legend_y << "\" width=\"12\" height=\"3\" fill=\"" << s.color
          << "\"/><text x=\"" << left + 28 << "\" y=\"" << legend_y + 5 << "\">" << detail::escape(s.label)
          << (s.right_axis && !ls.empty() ? " (right)" : "") << "</text>\n";
        legend_y += 16;
    }
    o << "</svg>\n";
    return o.str();
}

// Perceptually ordered blue-to-yellow colour for t in [0, 1].
inline std::string colormap(double t) {
    static const double stops[5][3] = {
        {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
    t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4.0;
    const int i = std::min(3, int(t));
    const double f = t - i;
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", int(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                  int(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                  int(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
    return buf;
}

// Grid of cells; grid(r, c) is drawn with row 0 at the bottom.
inline std::string heatmap(const Matrix& grid, double lo, double hi, const std::string& title, const std::string& x_label,
                           const std::string& y_label, int cell = 6) {
    if (grid.size() == 0) throw UsageError("heatmap: empty grid");
    const int left = 50, top = 36;
    const int w = int(grid.cols()) * cell, h = int(grid.rows()) * cell;
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w + left + 70 << "\" height=\"" << h + top + 40
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << left + w / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << detail::escape(title)
      << "</text>\n";
    for (std::size_t r = 0; r < grid.rows(); ++r) {
        for (std::size_t c = 0; c < grid.cols(); ++c) {
            const double t = hi > lo ? (grid(r, c) - lo) / (hi - lo) : 0.5;
            o << "<rect x=\"" << left + int(c) * cell << "\" y=\"" << top + h - (int(r) + 1) * cell << "\" width=\""
              << cell << "\" height=\"" << cell << "\" fill=\"" << colormap(t) << "\"/>\n";
        }
    }
    for (int i = 0; i <= 10; ++i) {
        const double f = i / 10.0;
        o << "<rect x=\"" << left + w + 20 << "\" y=\"" << detail::num(top + h - (f + 0.1) * h / 1.1) << "\" width=\"14\""
          << " height=\"" << detail::num(h / 11.0) << "\" fill=\"" << colormap(f) << "\"/>\n";
    }
    o << "<text x=\"" << left + w + 38 << "\" y=\"" << top + 10 << "\">" << detail::tick(hi) << "</text>\n";
    o << "<text x=\"" << left + w + 38 << "\" y=\"" << top + h << "\">" << detail::tick(lo) << "</text>\n";
    o << "<text x=\"" << left + w / 2 << "\" y=\"" << top + h + 28 << "\" text-anchor=\"middle\">"
      << detail::escape(x_label) << "</text>\n";
    o << "<text transform=\"translate(20," << top + h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::escape(y_label) << "</text>\n";
    o << "</svg>\n";
    return o.str();
}

} // namespace tabunc::svg
