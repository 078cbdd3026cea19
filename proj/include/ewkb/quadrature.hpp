#pragma once

#include "ewkb/errors.hpp"
#include "ewkb/path.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace ewkb {

struct QuadratureOptions {
    double rel_tol = 1e-10;
    double abs_tol = 1e-14; // floor on the absolute target
    int max_intervals = 4000;
};

struct QuadratureResult {
    cplx value{};
    double error_estimate = 0;
    long evaluations = 0;
    int intervals = 0;
};

namespace detail {

// 7-point Gauss / 15-point Kronrod pair (QUADPACK tables).
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Interval {
    cplx a, b;
    cplx value;
    double err;
};

template <class F>
cplx checked_eval(F& f, cplx t)
{
    const cplx v = f(t);
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
        throw NumericalError("integrand is not finite at t = " + fmt_c(t));
    return v;
}

// Symmetric node pairs are summed as f(m+h x) + f(m-h x), so an interval
// traversed backwards yields exactly the negated value.
template <class F>
Interval gk15(F& f, cplx a, cplx b)
{
    const cplx mid = 0.5 * (a + b);
    const cplx half = 0.5 * (b - a);
    const cplx fc = checked_eval(f, mid);
    cplx rk = fc * kWgk[7];
    cplx rg = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const cplx d = half * kXgk[j];
        const cplx s = checked_eval(f, mid + d) + checked_eval(f, mid - d);
        rk += kWgk[j] * s;
        if (j % 2 == 1)
            rg += kWg[j / 2] * s;
    }
    return {a, b, rk * half, std::abs((rk - rg) * half)};
}

} // namespace detail

// Adaptive Gauss-Kronrod integration of f along a polyline. The final sum is
// taken over intervals sorted by midpoint, which keeps the result independent
// of traversal order up to sign.
template <class F>
QuadratureResult integrate_path(F&& f, const PathPolyline& path, QuadratureOptions opt = {})
{
    using detail::Interval;
    auto cmp = [](const Interval& x, const Interval& y) {
        if (x.err != y.err)
            return x.err < y.err;
        return lex_less(x.a + x.b, y.a + y.b);
    };
    std::priority_queue<Interval, std::vector<Interval>, decltype(cmp)> heap(cmp);
    QuadratureResult res;
    cplx total{};
    double err = 0;
    for (std::size_t i = 0; i < path.segment_count(); ++i) {
        auto [a, b] = path.segment_at(i);
        if (a == b)
            continue;
        Interval iv = detail::gk15(f, a, b);
        res.evaluations += 15;
        total += iv.value;
        err += iv.err;
        heap.push(iv);
    }
    while (!heap.empty() && err > std::max(opt.rel_tol * std::abs(total), opt.abs_tol)) {
        if (static_cast<int>(heap.size()) >= opt.max_intervals) {
            const Interval& w = heap.top();
            throw NumericalError("quadrature did not converge; worst segment [" + fmt_c(w.a) +
                                 ", " + fmt_c(w.b) + "] error " + std::to_string(w.err));
        }
        Interval w = heap.top();
        heap.pop();
        const cplx m = 0.5 * (w.a + w.b);
        Interval l = detail::gk15(f, w.a, m);
        Interval r = detail::gk15(f, m, w.b);
        res.evaluations += 30;
        total += l.value + r.value - w.value;
        err += l.err + r.err - w.err;
        heap.push(l);
        heap.push(r);
    }
    std::vector<Interval> all;
    all.reserve(heap.size());
    while (!heap.empty()) {
        all.push_back(heap.top());
        heap.pop();
    }
    std::sort(all.begin(), all.end(), [](const Interval& x, const Interval& y) {
        return lex_less(x.a + x.b, y.a + y.b);
    });
    res.value = 0;
    res.error_estimate = 0;
    for (const auto& iv : all) {
        res.value += iv.value;
        res.error_estimate += iv.err;
    }
    res.intervals = static_cast<int>(all.size());
    return res;
}

template <class F>
QuadratureResult integrate_path(F&& f, const PathPolyline& path, double rel_tol)
{
    QuadratureOptions o;
    o.rel_tol = rel_tol;
    return integrate_path(std::forward<F>(f), path, o);
}

// Integral from a to b of a function with an inverse square-root or
// square-root type endpoint at a, using t = a + (b - a) u^2.
template <class F>
QuadratureResult integrate_from_branch_point(F&& f, cplx a, cplx b, QuadratureOptions opt = {})
{
    const cplx L = b - a;
    auto g = [&](cplx u) {
        const double x = u.real();
        return f(a + L * (x * x)) * (2.0 * x) * L;
    };
    return integrate_path(g, PathPolyline::segment(0.0, 1.0), opt);
}

// Fixed 3-point Gauss-Legendre rule on a straight segment.
template <class F>
cplx gauss3(F&& f, cplx a, cplx b)
{
    static const double x = std::sqrt(0.6);
    const cplx mid = 0.5 * (a + b), half = 0.5 * (b - a);
    return half * (5.0 / 9.0 * (f(mid - half * x) + f(mid + half * x)) + 8.0 / 9.0 * f(mid));
}

} // namespace ewkb
