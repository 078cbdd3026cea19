#pragma once

#include "ewkb/eigen.hpp"
#include "ewkb/quadrature.hpp"
#include "ewkb/turning_points.hpp"

#include <array>
#include <string>
#include <vector>

namespace ewkb {

enum class Termination { MaxRadius, TurningPoint, CutBoundary, StepLimit };

inline const char* to_string(Termination t)
{
    switch (t) {
    case Termination::MaxRadius: return "max_radius";
    case Termination::TurningPoint: return "turning_point";
    case Termination::CutBoundary: return "cut_boundary";
    case Termination::StepLimit: return "step_limit";
    }
    return "?";
}

struct RealCrossing {
    double x = 0;
    bool principal = true; // continued labels agree with the real-axis ordering
    int seen_i = 0, seen_j = 0; // real-axis labels of the continued pair
};

// A Stokes line: Re of the integral of (E_i - E_j) from its turning point
// vanishes along it. `dominant` is the level whose WKB solution grows along
// the line.
struct StokesLine {
    int id = 0;
    int tp = 0; // index into the graph's turning points
    int branch = 0; // 0..2
    int level_i = 0, level_j = 1;
    int dominant = 0, subdominant = 1;
    cplx direction;
    std::vector<cplx> points;
    std::vector<cplx> action; // integral of (E_i - E_j) from the turning point
    Termination termination = Termination::MaxRadius;
    int hit_tp = -1;
    std::vector<RealCrossing> crossings;
};

struct TraceOptions {
    double max_radius = 0;        // 0: 3 (max |t_c| + 1)
    double capture = 1e-2;        // times the spacing of the captured turning point
    int max_steps = 20000;
    double step_fraction = 0.08;  // step relative to the distance to the nearest turning point
    bool principal_sheet_only = false;
};

struct VirtualIntersection {
    int line_a, line_b;
    cplx point;
};

struct GraphOptions {
    bool auto_epsilon = true;
    std::vector<double> epsilon_sequence = {0.01, 0.05};
    double epsilon_sign = 1.0;
    bool find_intersections = true;
    TraceOptions trace;
};

struct StokesGraph {
    ModelSpec model; // with the epsilon actually used
    double epsilon_used = 0;
    bool escalated = false;
    std::vector<TurningPoint> turning_points;
    std::vector<StokesLine> lines;
    std::vector<std::string> degeneracies; // empty when the graph is resolved
    std::vector<VirtualIntersection> virtual_points;

    bool degenerate() const { return !degeneracies.empty(); }

    struct CrossingRef {
        double x;
        int line;
        int index; // into lines[line].crossings
    };
    // Principal real-axis crossings in ascending order.
    std::vector<CrossingRef> ordered_crossings() const
    {
        std::vector<CrossingRef> out;
        for (const auto& l : lines)
            for (std::size_t c = 0; c < l.crossings.size(); ++c)
                if (l.crossings[c].principal)
                    out.push_back({l.crossings[c].x, l.id, static_cast<int>(c)});
        std::sort(out.begin(), out.end(), [](const CrossingRef& a, const CrossingRef& b) {
            return a.x < b.x || (a.x == b.x && a.line < b.line);
        });
        return out;
    }
};

// Leading coefficient of (E_i - E_j)^2 ~ c^2 (t - t_c).
inline cplx local_c_squared(const ModelSpec& m, cplx tc, double scale)
{
    const double h = 1e-4 * scale;
    auto q = [&](cplx t) {
        const cplx g = pair_gap_near(m, t, 0.0);
        return g * g;
    };
    return (q(tc + h) - q(tc - h)) / (2.0 * h);
}

// Unit directions along which Re of (2/3) c (t - t_c)^{3/2} vanishes.
inline std::array<cplx, 3> directions_from_c2(cplx c2)
{
    std::array<cplx, 3> d;
    for (int k = 0; k < 3; ++k)
        d[k] = std::polar(1.0, (M_PI - std::arg(c2)) / 3.0 + 2.0 * M_PI * k / 3.0);
    return d;
}

// Unit directions in which the three Stokes lines leave a simple turning point.
inline std::array<cplx, 3> initial_directions(const ModelSpec& m, cplx tc, double scale = 1.0)
{
    return directions_from_c2(local_c_squared(m, tc, scale));
}

namespace detail {

inline double wrap_angle(double a, double lo)
{
    while (a < lo)
        a += 2 * M_PI;
    while (a >= lo + 2 * M_PI)
        a -= 2 * M_PI;
    return a;
}

// Do segments p0-p1 and q0-q1 intersect? Returns the point if so.
inline bool segments_intersect(cplx p0, cplx p1, cplx q0, cplx q1, cplx& at)
{
    const cplx r = p1 - p0, s = q1 - q0;
    const double den = r.real() * s.imag() - r.imag() * s.real();
    if (den == 0)
        return false;
    const cplx w = q0 - p0;
    const double u = (w.real() * s.imag() - w.imag() * s.real()) / den;
    const double v = (w.real() * r.imag() - w.imag() * r.real()) / den;
    if (u < 0 || u > 1 || v < 0 || v > 1)
        return false;
    at = p0 + u * r;
    return true;
}

} // namespace detail

// Trace the Stokes line leaving turning point `k` of the atlas in the branch
// direction `branch`.
inline StokesLine trace_line(const BranchAtlas& atlas, int k, int branch, TraceOptions opt = {})
{
    const ModelSpec& m = atlas.model();
    const auto& tps = atlas.turning_points();
    const TurningPoint& tp = tps.at(k);
    const cplx tc = tp.location;
    const int a = tp.level_i, b = tp.level_j;
    double rmax = opt.max_radius;
    double tp_extent = 0;
    for (const auto& p : tps)
        tp_extent = std::max(tp_extent, std::abs(p.location));
    if (rmax <= 0)
        rmax = 3.0 * (tp_extent + 1.0);

    StokesLine line;
    line.tp = k;
    line.branch = branch;
    line.level_i = a;
    line.level_j = b;
    const double r0 = atlas.foot_radius(k);
    const auto dirs = initial_directions(m, tc, atlas.local_scale(k));
    line.direction = dirs[branch];

    // Labels at the start point: go around the foot circle without crossing
    // the cut, which leaves the turning point away from the real axis.
    const double cut = tc.imag() > 0 ? M_PI / 2 : -M_PI / 2;
    const double foot_angle = cut - M_PI;
    double alpha = detail::wrap_angle(std::arg(line.direction), cut - 2 * M_PI);
    std::vector<cplx> arc;
    const int n_arc = 1 + static_cast<int>(std::ceil(std::abs(alpha - foot_angle) / (M_PI / 24)));
    for (int i = 0; i <= n_arc; ++i)
        arc.push_back(tc + std::polar(r0, foot_angle + (alpha - foot_angle) * i / n_arc));
    arc.front() = atlas.foot(k);
    EigenFrame frame = atlas.anchor(k).end();
    for (std::size_t i = 1; i < arc.size(); ++i)
        frame = continue_frame(m, frame, arc[i]);
    cplx t = arc.back();
    auto gap = [&](const EigenFrame& f) { return f.energies[a] - f.energies[b]; };
    cplx F = integral_from_turning_point(m, tc, t, gap(frame)).value;
    const double s = F.imag() >= 0 ? 1.0 : -1.0;
    line.dominant = s > 0 ? a : b;
    line.subdominant = s > 0 ? b : a;
    line.points.push_back(tc);
    line.action.push_back(0.0);
    line.points.push_back(t);
    line.action.push_back(F);

    double spacing = INFINITY;
    for (const auto& p : tps)
        if (p.location != tc)
            spacing = std::min(spacing, std::abs(p.location - tc));
    const double scale = std::max(1.0, tp_extent);
    auto tangent = [&](const EigenFrame& f) {
        const cplx g = gap(f);
        return s * cplx(0, 1) * std::conj(g) / std::abs(g);
    };
    auto nearest_tp = [&](cplx z, int& which) {
        double d = INFINITY;
        which = -1;
        for (std::size_t i = 0; i < tps.size(); ++i) {
            const double di = std::abs(tps[i].location - z);
            if (di < d) {
                d = di;
                which = static_cast<int>(i);
            }
        }
        return d;
    };

    bool left_origin = false;
    for (int step = 0; step < opt.max_steps; ++step) {
        int near_idx;
        const double dnear = nearest_tp(t, near_idx);
        if (near_idx != k || left_origin) {
            const double cap = opt.capture * atlas.local_scale(near_idx);
            if (dnear < cap && step > 0) {
                line.termination = Termination::TurningPoint;
                line.hit_tp = near_idx;
                line.points.push_back(tps[near_idx].location);
                line.action.push_back(F);
                break;
            }
        }
        if (std::abs(t - tc) > 0.1 * std::min(spacing, 1.0))
            left_origin = true;
        if (std::abs(t) > rmax) {
            line.termination = Termination::MaxRadius;
            break;
        }
        const double h = std::clamp(opt.step_fraction * dnear, 1e-7 * scale, 0.05 * scale);

        // RK4 in arclength
        const cplx k1 = tangent(frame);
        const EigenFrame f2 = continue_frame(m, frame, t + 0.5 * h * k1);
        const cplx k2 = tangent(f2);
        const EigenFrame f3 = continue_frame(m, frame, t + 0.5 * h * k2);
        const cplx k3 = tangent(f3);
        const EigenFrame f4 = continue_frame(m, frame, t + h * k3);
        const cplx k4 = tangent(f4);
        cplx tn = t + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        auto seg_integral = [&](const EigenFrame& from, cplx to) {
            return gauss3([&](cplx z) { return gap(continue_frame(m, from, z)); }, from.t, to);
        };
        cplx Fn = F + seg_integral(frame, tn);
        EigenFrame fn = continue_frame(m, frame, tn);
        // pull back onto Re F = 0 along the normal
        for (int it = 0; it < 2; ++it) {
            const cplx g = gap(fn);
            const cplx normal = cplx(0, 1) * tangent(fn);
            const double lam = Fn.real() / (s * std::abs(g));
            const cplx tc2 = tn + lam * normal;
            const EigenFrame fc = continue_frame(m, fn, tc2);
            Fn += seg_integral(fn, tc2);
            tn = tc2;
            fn = fc;
        }

        // cut crossing in principal-sheet mode
        if (opt.principal_sheet_only) {
            bool crossed = false;
            for (const auto& p : tps) {
                if (p.location == tc)
                    continue;
                const bool shares = p.level_i == a || p.level_j == a || p.level_i == b || p.level_j == b;
                if (!shares)
                    continue;
                const double x = p.location.real();
                if ((t.real() - x) * (tn.real() - x) < 0) {
                    const double u = (x - t.real()) / (tn.real() - t.real());
                    const double y = t.imag() + u * (tn.imag() - t.imag());
                    if (p.location.imag() > 0 ? y >= p.location.imag() : y <= p.location.imag())
                        crossed = true;
                }
            }
            if (crossed) {
                line.termination = Termination::CutBoundary;
                line.points.push_back(tn);
                line.action.push_back(Fn);
                break;
            }
        }

        // real-axis crossing
        if ((t.imag() > 0 && tn.imag() <= 0) || (t.imag() < 0 && tn.imag() >= 0)) {
            const double u = t.imag() / (t.imag() - tn.imag());
            double x = t.real() + u * (tn.real() - t.real());
            EigenFrame fx = continue_frame(m, frame, x);
            cplx Fx = F + seg_integral(frame, x);
            for (int it = 0; it < 4; ++it) {
                const double dx = -Fx.real() / gap(fx).real();
                const EigenFrame fy = continue_frame(m, fx, x + dx);
                Fx += seg_integral(fx, x + dx);
                x += dx;
                fx = fy;
                if (std::abs(dx) < 1e-14 * scale)
                    break;
            }
            RealCrossing rc;
            rc.x = x;
            // compare with the real-axis ordering
            const EigenFrame sorted = real_axis_frame(m, x);
            auto label_of = [&](cplx e) {
                int best = 0;
                for (int j = 1; j < sorted.size(); ++j)
                    if (std::abs(sorted.energies[j] - e) < std::abs(sorted.energies[best] - e))
                        best = j;
                return best;
            };
            rc.seen_i = label_of(fx.energies[a]);
            rc.seen_j = label_of(fx.energies[b]);
            rc.principal = rc.seen_i == a && rc.seen_j == b;
            line.crossings.push_back(rc);
        }

        t = tn;
        F = Fn;
        frame = std::move(fn);
        line.points.push_back(t);
        line.action.push_back(F);
        if (step + 1 == opt.max_steps)
            line.termination = Termination::StepLimit;
    }
    return line;
}

namespace detail {

inline StokesGraph trace_graph(const ModelSpec& m, const GraphOptions& opt)
{
    StokesGraph g;
    g.model = m;
    g.epsilon_used = m.epsilon;
    BranchAtlas atlas(m);
    g.turning_points = atlas.turning_points();
    for (std::size_t k = 0; k < g.turning_points.size(); ++k) {
        const auto& tp = g.turning_points[k];
        if (tp.order != 1) {
            g.degeneracies.push_back("turning point " + fmt_c(tp.location) + " has order " +
                                     std::to_string(tp.order));
            continue;
        }
        for (int b = 0; b < 3; ++b) {
            StokesLine l = trace_line(atlas, static_cast<int>(k), b, opt.trace);
            l.id = static_cast<int>(g.lines.size());
            g.lines.push_back(std::move(l));
        }
    }
    double scale = 1;
    for (const auto& tp : g.turning_points)
        scale = std::max(scale, std::abs(tp.location));
    for (const auto& l : g.lines) {
        if (l.termination == Termination::TurningPoint)
            g.degeneracies.push_back("Stokes line " + std::to_string(l.id) + " from " +
                                     fmt_c(g.turning_points[l.tp].location) + " runs into turning point " +
                                     fmt_c(g.turning_points[l.hit_tp].location));
        if (l.termination == Termination::StepLimit)
            g.degeneracies.push_back("Stokes line " + std::to_string(l.id) + " did not terminate");
    }
    auto cr = g.ordered_crossings();
    for (std::size_t i = 1; i < cr.size(); ++i)
        if (cr[i].x - cr[i - 1].x < 1e-4 * scale)
            g.degeneracies.push_back("Stokes lines " + std::to_string(cr[i - 1].line) + " and " +
                                     std::to_string(cr[i].line) + " cross the real axis at the same point " +
                                     std::to_string(cr[i].x));
    if (opt.find_intersections) {
        // bounding boxes of 16-segment chunks keep this cheap
        struct Chunk {
            int line;
            std::size_t begin, end;
            double x0, x1, y0, y1;
        };
        std::vector<Chunk> chunks;
        for (const auto& l : g.lines)
            for (std::size_t s = 0; s + 1 < l.points.size(); s += 16) {
                Chunk c{l.id, s, std::min(s + 16, l.points.size() - 1), INFINITY, -INFINITY, INFINITY, -INFINITY};
                for (std::size_t p = c.begin; p <= c.end; ++p) {
                    c.x0 = std::min(c.x0, l.points[p].real());
                    c.x1 = std::max(c.x1, l.points[p].real());
                    c.y0 = std::min(c.y0, l.points[p].imag());
                    c.y1 = std::max(c.y1, l.points[p].imag());
                }
                chunks.push_back(c);
            }
        for (std::size_t i = 0; i < chunks.size(); ++i)
            for (std::size_t j = i + 1; j < chunks.size(); ++j) {
                const Chunk &A = chunks[i], &B = chunks[j];
                if (g.lines[A.line].tp == g.lines[B.line].tp)
                    continue;
                if (A.x1 < B.x0 || B.x1 < A.x0 || A.y1 < B.y0 || B.y1 < A.y0)
                    continue;
                const auto& pa = g.lines[A.line].points;
                const auto& pb = g.lines[B.line].points;
                for (std::size_t p = A.begin; p < A.end; ++p)
                    for (std::size_t q = B.begin; q < B.end; ++q) {
                        cplx at;
                        if (segments_intersect(pa[p], pa[p + 1], pb[q], pb[q + 1], at)) {
                            bool at_tp = false;
                            for (const auto& tp : g.turning_points)
                                at_tp = at_tp || std::abs(tp.location - at) < 1e-6 * scale;
                            if (!at_tp)
                                g.virtual_points.push_back({A.line, B.line, at});
                        }
                    }
            }
    }
    return g;
}

} // namespace detail

// Stokes graph of all turning points. With auto_epsilon a degenerate graph is
// rebuilt with the loss parameter from the escalation sequence.
inline StokesGraph build_graph(const ModelSpec& m, const GraphOptions& opt = {})
{
    StokesGraph g = detail::trace_graph(m, opt);
    if (!g.degenerate() || !opt.auto_epsilon)
        return g;
    const std::vector<std::string> first = g.degeneracies;
    for (double e : opt.epsilon_sequence) {
        const double eps = opt.epsilon_sign * e;
        if (std::abs(eps) <= std::abs(m.epsilon))
            continue;
        StokesGraph h = detail::trace_graph(m.with_epsilon(eps), opt);
        h.epsilon_used = eps;
        h.escalated = true;
        if (!h.degenerate())
            return h;
    }
    return g;
}

} // namespace ewkb
