#pragma once

#include "ewkb/stokes.hpp"

#include <cstdio>
#include <sstream>
#include <string>

namespace ewkb {

inline std::string fmt_g17(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// One row per polyline sample; levels are 1-based.
inline std::string graph_to_csv(const StokesGraph& g)
{
    std::ostringstream os;
    os << "line,tp_re,tp_im,level_i,level_j,dominant,re,im\n";
    for (const auto& l : g.lines) {
        const cplx tp = g.turning_points[l.tp].location;
        const std::string head = std::to_string(l.id) + "," + fmt_g17(tp.real()) + "," + fmt_g17(tp.imag()) +
                                 "," + std::to_string(l.level_i + 1) + "," + std::to_string(l.level_j + 1) +
                                 "," + std::to_string(l.dominant + 1) + ",";
        for (auto p : l.points)
            os << head << fmt_g17(p.real()) << "," << fmt_g17(p.imag()) << "\n";
    }
    return os.str();
}

inline std::string graph_to_svg(const StokesGraph& g, double half_width = 0)
{
    double R = half_width;
    if (R <= 0) {
        for (const auto& tp : g.turning_points)
            R = std::max(R, std::abs(tp.location));
        R = 1.6 * R + 0.5;
    }
    const double W = 640, S = W / (2 * R);
    auto X = [&](cplx z) { return fmt_g17(std::round((z.real() + R) * S * 100) / 100); };
    auto Y = [&](cplx z) { return fmt_g17(std::round((R - z.imag()) * S * 100) / 100); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << W
       << "\" viewBox=\"0 0 " << W << " " << W << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<line x1=\"0\" y1=\"" << Y(0.0) << "\" x2=\"" << W << "\" y2=\"" << Y(0.0)
       << "\" stroke=\"#888\" stroke-width=\"1\"/>\n";
    os << "<line x1=\"" << X(0.0) << "\" y1=\"0\" x2=\"" << X(0.0) << "\" y2=\"" << W
       << "\" stroke=\"#ccc\" stroke-width=\"1\"/>\n";
    for (const auto& l : g.lines) {
        const int pair = l.level_i * g.model.dimension + l.level_j;
        os << "<polyline fill=\"none\" stroke=\"" << colors[pair % 6] << "\" stroke-width=\"1.5\""
           << (l.dominant == l.level_j ? " stroke-dasharray=\"5,3\"" : "") << " points=\"";
        for (std::size_t i = 0; i < l.points.size(); ++i) {
            const cplx p = l.points[i];
            if (std::abs(p.real()) > 2 * R || std::abs(p.imag()) > 2 * R)
                continue;
            os << (i ? " " : "") << X(p) << "," << Y(p);
        }
        os << "\"/>\n";
    }
    for (const auto& tp : g.turning_points)
        os << "<circle cx=\"" << X(tp.location) << "\" cy=\"" << Y(tp.location)
           << "\" r=\"4\" fill=\"black\"/>\n";
    for (const auto& v : g.virtual_points)
        os << "<circle cx=\"" << X(v.point) << "\" cy=\"" << Y(v.point)
           << "\" r=\"2.5\" fill=\"none\" stroke=\"#555\"/>\n";
    os << "</svg>\n";
    return os.str();
}

} // namespace ewkb
