#pragma once

#include "ewkb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace ewkb {

struct RootOptions {
    double tol = 1e-13;     // accepted Newton step, relative to 1 + |z|
    int max_iter = 100;
    double residual = 1e-8; // |f(root)| relative to |f'| (1 + |z|)
};

struct RootResult {
    cplx root;
    int iterations = 0;
    double residual = 0; // |f(root)|
};

// Central-difference derivative with step 1e-6 (1 + |z|).
template <class F>
cplx numeric_derivative(F& f, cplx z)
{
    const double h = 1e-6 * (1.0 + std::abs(z));
    return (f(z + h) - f(z - h)) / (2.0 * h);
}

// Damped Newton iteration from a seed.
template <class F>
RootResult find_root(F&& f, cplx seed, RootOptions opt = {})
{
    cplx z = seed;
    cplx fz = f(z);
    for (int it = 1; it <= opt.max_iter; ++it) {
        const cplx d = numeric_derivative(f, z);
        // compare the local slope with the variation of f over a wider stencil
        const double h0 = 1e-3 * (1.0 + std::abs(z));
        const double spread = std::max(std::abs(f(z + h0) - fz), std::abs(f(z - h0) - fz));
        if (std::abs(d) * h0 <= 1e-8 * spread || std::abs(d) == 0.0)
            throw NumericalError("derivative vanishes near " + fmt_c(z) +
                                 "; possible higher-order zero");
        cplx step = fz / d;
        cplx zn = z - step;
        cplx fn = f(zn);
        for (int k = 0; k < 30 && !(std::abs(fn) < std::abs(fz)) && std::abs(step) > opt.tol; ++k) {
            step *= 0.5;
            zn = z - step;
            fn = f(zn);
        }
        if (!std::isfinite(std::abs(zn)) || !std::isfinite(std::abs(fn)))
            throw NumericalError("Newton iteration diverged; last iterate " + fmt_c(z));
        z = zn;
        fz = fn;
        if (std::abs(step) <= opt.tol * (1.0 + std::abs(z))) {
            const cplx d2 = numeric_derivative(f, z);
            if (std::abs(fz) > opt.residual * std::abs(d2) * (1.0 + std::abs(z)) + 1e-300)
                throw NumericalError("Newton stalled at " + fmt_c(z) + " with residual " +
                                     std::to_string(std::abs(fz)));
            return {z, it, std::abs(fz)};
        }
    }
    throw NumericalError("Newton iteration did not converge; last iterate " + fmt_c(z));
}

struct Rect {
    double x0, x1, y0, y1;
    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    cplx center() const { return {0.5 * (x0 + x1), 0.5 * (y0 + y1)}; }
    bool contains(cplx z, double slack = 0) const
    {
        return z.real() >= x0 - slack && z.real() <= x1 + slack && z.imag() >= y0 - slack &&
               z.imag() <= y1 + slack;
    }
};

namespace detail {

// Winding of f along the segment a -> b, refining until consecutive phase
// increments are small. Returns false if f comes too close to zero.
template <class F>
bool edge_winding(F& f, cplx a, cplx b, double tiny, double& acc, int depth_limit = 40)
{
    struct Node {
        cplx t;
        cplx v;
    };
    const int n0 = 32;
    std::vector<Node> pts;
    pts.reserve(n0 + 1);
    for (int k = 0; k <= n0; ++k) {
        const cplx t = a + (b - a) * (double(k) / n0);
        pts.push_back({t, f(t)});
        if (std::abs(pts.back().v) <= tiny)
            return false;
    }
    std::function<bool(const Node&, const Node&, int)> seg = [&](const Node& p, const Node& q,
                                                                 int depth) -> bool {
        const double dphi = std::arg(q.v / p.v);
        if (std::abs(dphi) < M_PI / 8) {
            acc += dphi;
            return true;
        }
        if (depth >= depth_limit)
            return false;
        const cplx tm = 0.5 * (p.t + q.t);
        Node m{tm, f(tm)};
        if (std::abs(m.v) <= tiny)
            return false;
        return seg(p, m, depth + 1) && seg(m, q, depth + 1);
    };
    for (int k = 0; k < n0; ++k)
        if (!seg(pts[k], pts[k + 1], 0))
            return false;
    return true;
}

template <class F>
double rect_scale(F& f, const Rect& r)
{
    double s = 0;
    for (int i = 0; i <= 4; ++i)
        for (int j = 0; j <= 4; ++j)
            s = std::max(s, std::abs(f(cplx(r.x0 + r.width() * i / 4, r.y0 + r.height() * j / 4))));
    return s;
}

} // namespace detail

// Number of zeros (with multiplicity) of an analytic f inside rect, via the
// argument principle. If a zero sits on the boundary the rectangle is grown
// slightly and the count retried.
template <class F>
int count_zeros(F&& f, Rect rect, double* nudged_by = nullptr)
{
    const double scale = detail::rect_scale(f, rect);
    const double tiny = 1e-12 * (scale > 0 ? scale : 1.0);
    const double size = std::max(rect.width(), rect.height());
    for (int attempt = 0; attempt < 6; ++attempt) {
        const double grow = attempt == 0 ? 0.0 : size * 1e-3 * attempt * (attempt % 2 ? 1 : 0.37);
        Rect r{rect.x0 - grow, rect.x1 + grow, rect.y0 - grow, rect.y1 + grow};
        const cplx c[4] = {{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}};
        double acc = 0;
        bool ok = true;
        for (int e = 0; e < 4 && ok; ++e)
            ok = detail::edge_winding(f, c[e], c[(e + 1) % 4], tiny, acc);
        if (!ok)
            continue;
        const double w = acc / (2 * M_PI);
        const double n = std::round(w);
        if (std::abs(w - n) > 1e-3)
            continue;
        if (nudged_by)
            *nudged_by = grow;
        return static_cast<int>(n);
    }
    throw NumericalError("argument principle failed: zero on or near the boundary of [" +
                         std::to_string(rect.x0) + "," + std::to_string(rect.x1) + "]x[" +
                         std::to_string(rect.y0) + "," + std::to_string(rect.y1) + "]");
}

struct LocatedZero {
    cplx z;
    int order = 1;
};

namespace detail {

template <class F>
cplx grid_minimum(F& f, const Rect& r, int n = 8)
{
    cplx best = r.center();
    double bv = INFINITY;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            const cplx t(r.x0 + r.width() * i / n, r.y0 + r.height() * j / n);
            const double v = std::abs(f(t));
            if (v < bv) {
                bv = v;
                best = t;
            }
        }
    return best;
}

template <class F>
void locate_in(F& f, Rect r, int count, double min_size, int depth, std::vector<LocatedZero>& out)
{
    if (count <= 0)
        return;
    const double size = std::max(r.width(), r.height());
    if (count == 1) {
        try {
            RootResult rr = find_root(f, grid_minimum(f, r));
            if (r.contains(rr.root, 1e-9 * size)) {
                out.push_back({rr.root, 1});
                return;
            }
        } catch (const NumericalError&) {
        }
    }
    if (size <= min_size || depth > 60) {
        // Cluster or higher-order zero: report the |f| minimum with its order.
        cplx z = grid_minimum(f, r, 16);
        try {
            RootResult rr = find_root(f, z);
            if (r.contains(rr.root, size))
                z = rr.root;
        } catch (const NumericalError&) {
        }
        out.push_back({z, count});
        return;
    }
    // Split slightly off-center so the new edges rarely pass through zeros.
    const double xm = r.x0 + r.width() * 0.5017, ym = r.y0 + r.height() * 0.4983;
    const Rect q[4] = {{r.x0, xm, r.y0, ym}, {xm, r.x1, r.y0, ym}, {r.x0, xm, ym, r.y1},
                       {xm, r.x1, ym, r.y1}};
    int total = 0;
    int counts[4];
    for (int k = 0; k < 4; ++k) {
        counts[k] = count_zeros(f, q[k]);
        total += counts[k];
    }
    (void)total;
    for (int k = 0; k < 4; ++k)
        locate_in(f, q[k], counts[k], min_size, depth + 1, out);
}

} // namespace detail

// All zeros of f inside rect, found by argument-principle subdivision and
// Newton polishing. Zeros closer than min_size are merged and reported with
// their combined order.
template <class F>
std::vector<LocatedZero> find_zeros(F&& f, Rect rect, double min_size)
{
    std::vector<LocatedZero> out;
    const int n = count_zeros(f, rect);
    detail::locate_in(f, rect, n, min_size, 0, out);
    // Merge duplicates that slipped in through nudged counts.
    std::vector<LocatedZero> merged;
    for (const auto& z : out) {
        bool dup = false;
        for (auto& m : merged)
            if (std::abs(m.z - z.z) < 1e-8 * (1 + std::abs(z.z))) {
                dup = true;
                break;
            }
        if (!dup)
            merged.push_back(z);
    }
    std::sort(merged.begin(), merged.end(), [](const LocatedZero& a, const LocatedZero& b) {
        return lex_less(a.z, b.z);
    });
    return merged;
}

} // namespace ewkb
