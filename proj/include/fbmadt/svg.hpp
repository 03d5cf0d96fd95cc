// Static SVG plots: reliability curves and degradation fans.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "fbmadt/dataset.hpp"
#include "fbmadt/reliability.hpp"

namespace fbmadt::svg {

struct Series {
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    double width = 1.5;
    double opacity = 1.0;
    bool dashed = false;
};

struct Plot {
    std::string title, x_label, y_label;
    std::vector<Series> series;
    double width = 720, height = 440;
};

namespace detail {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

/// About five round tick values covering [lo, hi].
inline std::vector<double> ticks(double lo, double hi) {
    const double span = hi - lo;
    if (!(span > 0.0)) return {lo};
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> out;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * span; t += step) out.push_back(t);
    return out;
}

}  // namespace detail

inline std::string render(const Plot& p) {
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : p.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;

    const double ml = 70, mr = 20, mt = 40, mb = 50;
    const double pw = p.width - ml - mr, ph = p.height - mt - mb;
    auto sx = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return mt + (1.0 - (y - y0) / (y1 - y0)) * ph; };
    using detail::num;

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(p.width) << "\" height=\"" << num(p.height)
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << num(p.width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << detail::escape(p.title) << "</text>\n";
    o << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : detail::ticks(x0, x1))
        o << "<line x1=\"" << num(sx(t)) << "\" y1=\"" << num(mt + ph) << "\" x2=\"" << num(sx(t)) << "\" y2=\""
          << num(mt + ph + 5) << "\" stroke=\"black\"/><text x=\"" << num(sx(t)) << "\" y=\"" << num(mt + ph + 18)
          << "\" text-anchor=\"middle\">" << num(t) << "</text>\n";
    for (double t : detail::ticks(y0, y1))
        o << "<line x1=\"" << num(ml - 5) << "\" y1=\"" << num(sy(t)) << "\" x2=\"" << num(ml) << "\" y2=\""
          << num(sy(t)) << "\" stroke=\"black\"/><text x=\"" << num(ml - 8) << "\" y=\"" << num(sy(t) + 4)
          << "\" text-anchor=\"end\">" << num(t) << "</text>\n";
    o << "<text x=\"" << num(ml + pw / 2) << "\" y=\"" << num(p.height - 10) << "\" text-anchor=\"middle\">"
      << detail::escape(p.x_label) << "</text>\n";
    o << "<text transform=\"translate(16," << num(mt + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::escape(p.y_label) << "</text>\n";
    for (const auto& s : p.series) {
        o << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"" << num(s.width)
          << "\" stroke-opacity=\"" << num(s.opacity) << "\"" << (s.dashed ? " stroke-dasharray=\"6 4\"" : "")
          << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) o << num(sx(s.x[i])) << ',' << num(sy(s.y[i])) << ' ';
        o << "\"/>\n";
    }
    o << "</svg>\n";
    return o.str();
}

inline std::string reliability_plot(const ReliabilityCurve& c, const std::string& title) {
    Plot p;
    p.title = title;
    p.x_label = "time (h)";
    p.y_label = "reliability";
    p.series.push_back({c.times.values(), c.r_values, "#1f77b4", 2.0, 1.0, false});
    return render(p);
}

/// Observed unit paths per level over the simulated mean and quantile band.
inline std::string degradation_fan(const AdtDataset& data, const std::vector<PathBands>& bands,
                                   const std::string& title) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    Plot p;
    p.title = title;
    p.x_label = "time (h)";
    p.y_label = "degradation";
    for (std::size_t l = 0; l < data.levels.size(); ++l) {
        const std::string col = colors[l % 6];
        for (const auto& u : data.levels[l].units) p.series.push_back({u.times.values(), u.values, col, 0.8, 0.5, false});
        if (l < bands.size()) {
            const auto& t = data.levels[l].units.front().times.values();
            p.series.push_back({t, bands[l].mean, col, 2.2, 1.0, false});
            p.series.push_back({t, bands[l].lower, col, 1.4, 1.0, true});
            p.series.push_back({t, bands[l].upper, col, 1.4, 1.0, true});
        }
    }
    return render(p);
}

}  // namespace fbmadt::svg
