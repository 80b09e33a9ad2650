#pragma once

// Minimal SVG line charts for sweep outputs (linear or logarithmic axes).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

namespace kppflow {

struct ChartSeries {
    std::string label;
    std::vector<double> x, y;
};

struct ChartOptions {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool logx = false;
    bool logy = false;
    int width = 640;
    int height = 420;
};

namespace detail {

inline std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string o;
    for (char c : s) {
        switch (c) {
            case '<': o += "&lt;"; break;
            case '>': o += "&gt;"; break;
            case '&': o += "&amp;"; break;
            case '"': o += "&quot;"; break;
            default: o += c;
        }
    }
    return o;
}

/// Tick positions in data units for [lo, hi] (transformed units when log).
inline std::vector<double> axis_ticks(double lo, double hi, bool log) {
    std::vector<double> t;
    if (log) {
        const int a = static_cast<int>(std::ceil(lo - 1e-9)), b = static_cast<int>(std::floor(hi + 1e-9));
        if (b - a >= 1) {
            const int step = std::max(1, (b - a) / 6);
            for (int k = a; k <= b; k += step)
                t.push_back(std::pow(10.0, k));
            return t;
        }
    }
    const double a = log ? std::pow(10.0, lo) : lo, b = log ? std::pow(10.0, hi) : hi;
    const double raw = (b - a) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    for (double v = std::ceil(a / step) * step; v <= b + 1e-9 * step; v += step)
        t.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
    return t;
}

}  // namespace detail

/// Render series as polylines; non-positive values are dropped on log axes.
inline std::string line_chart_svg(const std::vector<ChartSeries>& series, const ChartOptions& opt) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"};
    auto tx = [&](double v) { return opt.logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return opt.logy ? std::log10(v) : v; };
    auto keep = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!opt.logx || x > 0.0) && (!opt.logy || y > 0.0);
    };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (keep(s.x[i], s.y[i])) {
                x0 = std::min(x0, tx(s.x[i]));
                x1 = std::max(x1, tx(s.x[i]));
                y0 = std::min(y0, ty(s.y[i]));
                y1 = std::max(y1, ty(s.y[i]));
            }
    if (!std::isfinite(x0)) {
        x0 = y0 = 0.0;
        x1 = y1 = 1.0;
    }
    if (x1 - x0 < 1e-12) {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if (y1 - y0 < 1e-12 * std::max(1.0, std::abs(y0))) {
        const double pad = opt.logy ? 0.1 : std::max(0.5, 0.05 * std::abs(y0));
        y0 -= pad;
        y1 += pad;
    }
    const double ml = 70, mr = 150, mt = 40, mb = 55;
    const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;
    auto px = [&](double v) { return ml + (v - x0) / (x1 - x0) * pw; };
    auto py = [&](double v) { return mt + ph - (v - y0) / (y1 - y0) * ph; };

    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << opt.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << detail::xml_escape(opt.title) << "</text>\n";
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : detail::axis_ticks(x0, x1, opt.logx)) {
        const double p = px(tx(t));
        if (p < ml - 1e-9 || p > ml + pw + 1e-9)
            continue;
        os << "<line x1=\"" << p << "\" y1=\"" << mt + ph << "\" x2=\"" << p << "\" y2=\"" << mt
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << p << "\" y=\"" << mt + ph + 16 << "\" text-anchor=\"middle\">" << detail::fmt_num(t)
           << "</text>\n";
    }
    for (double t : detail::axis_ticks(y0, y1, opt.logy)) {
        const double p = py(ty(t));
        if (p < mt - 1e-9 || p > mt + ph + 1e-9)
            continue;
        os << "<line x1=\"" << ml << "\" y1=\"" << p << "\" x2=\"" << ml + pw << "\" y2=\"" << p
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << ml - 6 << "\" y=\"" << p + 4 << "\" text-anchor=\"end\">" << detail::fmt_num(t)
           << "</text>\n";
    }
    os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << opt.height - 12 << "\" text-anchor=\"middle\">"
       << detail::xml_escape(opt.xlabel + (opt.logx ? " (log)" : "")) << "</text>\n";
    os << "<text transform=\"translate(16," << mt + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
       << detail::xml_escape(opt.ylabel + (opt.logy ? " (log)" : "")) << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* col = colors[k % 7];
        std::ostringstream pts;
        pts.precision(6);
        int n = 0;
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (keep(s.x[i], s.y[i])) {
                pts << (n++ ? " " : "") << px(tx(s.x[i])) << "," << py(ty(s.y[i]));
            }
        if (n > 0) {
            os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.8\" points=\"" << pts.str()
               << "\"/>\n";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                if (keep(s.x[i], s.y[i]))
                    os << "<circle cx=\"" << px(tx(s.x[i])) << "\" cy=\"" << py(ty(s.y[i])) << "\" r=\"2.5\" fill=\""
                       << col << "\"/>\n";
        }
        const double ly = mt + 14 + 18.0 * k;
        os << "<line x1=\"" << ml + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << ml + pw + 30 << "\" y2=\"" << ly
           << "\" stroke=\"" << col << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << ml + pw + 35 << "\" y=\"" << ly + 4 << "\">" << detail::xml_escape(s.label)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace kppflow
