#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "aod/errors.hpp"

namespace aod {

struct MapPoint {
    std::string name;
    double lat = 0.0;
    double lon = 0.0;
    double value = 0.0;
};

namespace svg_detail {

struct Rgb {
    double r, g, b;
};

inline Rgb lerp(Rgb a, Rgb b, double t) {
    return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

inline std::string css(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", static_cast<int>(std::lround(c.r)),
                  static_cast<int>(std::lround(c.g)), static_cast<int>(std::lround(c.b)));
    return buf;
}

// Sequential ramp (light -> dark orange) for magnitudes, diverging
// blue-white-red centered at zero for signed metrics.
inline Rgb color_at(double t, bool diverging) {
    t = std::clamp(t, 0.0, 1.0);
    if (!diverging) return lerp({255, 245, 235}, {127, 39, 4}, t);
    const Rgb blue{33, 102, 172}, white{247, 247, 247}, red{178, 24, 43};
    return t < 0.5 ? lerp(blue, white, t * 2.0) : lerp(white, red, (t - 0.5) * 2.0);
}

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

} // namespace svg_detail

// Equirectangular scatter of per-site values; one circle per site plus a
// color legend. `diverging` should be set for signed metrics (MBE).
inline std::string render_site_map(const std::vector<MapPoint>& points, const std::string& metric,
                                   bool diverging) {
    const double width = 900, height = 520;
    const double ml = 40, mr = 110, mt = 30, mb = 40; // margins
    const double plot_w = width - ml - mr, plot_h = height - mt - mb;

    auto x_of = [&](double lon) { return ml + (lon + 180.0) / 360.0 * plot_w; };
    auto y_of = [&](double lat) { return mt + (90.0 - lat) / 180.0 * plot_h; };

    double lo = 0.0, hi = 1.0;
    if (!points.empty()) {
        lo = hi = points.front().value;
        for (const MapPoint& p : points) {
            lo = std::min(lo, p.value);
            hi = std::max(hi, p.value);
        }
    }
    if (diverging) {
        const double mag = std::max(std::fabs(lo), std::fabs(hi));
        lo = -(mag > 0 ? mag : 1.0);
        hi = mag > 0 ? mag : 1.0;
    } else if (hi <= lo) {
        hi = lo + 1.0;
    }
    auto t_of = [&](double v) { return (v - lo) / (hi - lo); };

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           svg_detail::fmt(width) + "\" height=\"" + svg_detail::fmt(height) + "\" viewBox=\"0 0 " +
           svg_detail::fmt(width) + " " + svg_detail::fmt(height) + "\">\n";

    // gradient for the legend bar
    out += "<defs><linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">";
    for (int i = 0; i <= 8; ++i) {
        const double t = i / 8.0;
        out += "<stop offset=\"" + svg_detail::fmt(t * 100.0) + "%\" stop-color=\"" +
               svg_detail::css(svg_detail::color_at(t, diverging)) + "\"/>";
    }
    out += "</linearGradient></defs>\n";

    out += "<rect x=\"0\" y=\"0\" width=\"" + svg_detail::fmt(width) + "\" height=\"" +
           svg_detail::fmt(height) + "\" fill=\"#ffffff\"/>\n";
    out += "<rect x=\"" + svg_detail::fmt(ml) + "\" y=\"" + svg_detail::fmt(mt) + "\" width=\"" +
           svg_detail::fmt(plot_w) + "\" height=\"" + svg_detail::fmt(plot_h) +
           "\" fill=\"#f4f8fb\" stroke=\"#555555\"/>\n";

    // graticule every 30 degrees
    for (int lon = -150; lon <= 150; lon += 30)
        out += "<line x1=\"" + svg_detail::fmt(x_of(lon)) + "\" y1=\"" + svg_detail::fmt(mt) +
               "\" x2=\"" + svg_detail::fmt(x_of(lon)) + "\" y2=\"" + svg_detail::fmt(mt + plot_h) +
               "\" stroke=\"#d8e0e8\" stroke-width=\"0.5\"/>\n";
    for (int lat = -60; lat <= 60; lat += 30)
        out += "<line x1=\"" + svg_detail::fmt(ml) + "\" y1=\"" + svg_detail::fmt(y_of(lat)) +
               "\" x2=\"" + svg_detail::fmt(ml + plot_w) + "\" y2=\"" + svg_detail::fmt(y_of(lat)) +
               "\" stroke=\"#d8e0e8\" stroke-width=\"0.5\"/>\n";

    for (const MapPoint& p : points) {
        out += "<circle cx=\"" + svg_detail::fmt(x_of(p.lon)) + "\" cy=\"" +
               svg_detail::fmt(y_of(p.lat)) + "\" r=\"5\" fill=\"" +
               svg_detail::css(svg_detail::color_at(t_of(p.value), diverging)) +
               "\" stroke=\"#333333\" stroke-width=\"0.8\"><title>" + p.name + ": " +
               svg_detail::fmt(p.value) + "</title></circle>\n";
    }

    // legend
    const double lx = ml + plot_w + 20, ly = mt + 20, lh = plot_h - 40;
    out += "<rect x=\"" + svg_detail::fmt(lx) + "\" y=\"" + svg_detail::fmt(ly) +
           "\" width=\"16\" height=\"" + svg_detail::fmt(lh) +
           "\" fill=\"url(#scale)\" stroke=\"#555555\"/>\n";
    out += "<text x=\"" + svg_detail::fmt(lx + 22) + "\" y=\"" + svg_detail::fmt(ly + 10) +
           "\" font-size=\"12\" font-family=\"sans-serif\">" + svg_detail::fmt(hi) + "</text>\n";
    out += "<text x=\"" + svg_detail::fmt(lx + 22) + "\" y=\"" + svg_detail::fmt(ly + lh) +
           "\" font-size=\"12\" font-family=\"sans-serif\">" + svg_detail::fmt(lo) + "</text>\n";
    out += "<text x=\"" + svg_detail::fmt(lx) + "\" y=\"" + svg_detail::fmt(ly - 8) +
           "\" font-size=\"13\" font-family=\"sans-serif\">" + metric + "</text>\n";

    out += "</svg>\n";
    return out;
}

} // namespace aod
