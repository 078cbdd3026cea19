#pragma once

#include "ewkb/errors.hpp"

#include <cmath>
#include <vector>

namespace ewkb {

struct ResidueOptions {
    double start_angle = 0.0; // first trapezoid node; matters for branch-tracked callables
    double tol = 1e-12;
    int max_nodes = 1 << 14;
    double consistency = 1e-6; // allowed relative mismatch between radius and radius/2
};

struct ResidueResult {
    cplx value;
    cplx half_radius_value;
    int nodes = 0;
};

namespace detail {

// Trapezoidal rule for (1/2 pi i) times the contour integral; spectrally
// accurate for integrands analytic in an annulus around the circle.
template <class F>
cplx circle_mean(F& f, cplx center, double r, double phi0, double tol, int max_nodes, int& used)
{
    auto node = [&](int k, int m) {
        const cplx w = std::polar(r, phi0 + 2.0 * M_PI * k / m);
        const cplx v = f(center + w) * w;
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw NumericalError("residue integrand not finite at " + fmt_c(center + w));
        return v;
    };
    int m = 16;
    cplx sum{};
    for (int k = 0; k < m; ++k)
        sum += node(k, m);
    cplx prev = sum / double(m);
    double scale = std::abs(prev);
    while (m < max_nodes) {
        for (int k = 1; k < 2 * m; k += 2)
            sum += node(k, 2 * m);
        m *= 2;
        const cplx cur = sum / double(m);
        scale = std::max(scale, std::abs(cur));
        if (std::abs(cur - prev) <= tol * std::max(std::abs(cur), 1e-3 * scale) + 1e-300) {
            used = m;
            return cur;
        }
        prev = cur;
    }
    throw NumericalError("residue quadrature did not converge at radius " + std::to_string(r));
}

} // namespace detail

// Residue of f at center, from circles of radius r and r/2. Disagreement
// indicates another singularity or a branch cut inside the annulus.
template <class F>
ResidueResult residue_at(F&& f, cplx center, double radius, ResidueOptions opt = {})
{
    ResidueResult res;
    int n1 = 0, n2 = 0;
    res.value = detail::circle_mean(f, center, radius, opt.start_angle, opt.tol, opt.max_nodes, n1);
    res.half_radius_value =
        detail::circle_mean(f, center, 0.5 * radius, opt.start_angle, opt.tol, opt.max_nodes, n2);
    res.nodes = n1 + n2;
    const double mag = std::max(std::abs(res.value), std::abs(res.half_radius_value));
    if (std::abs(res.value - res.half_radius_value) > opt.consistency * std::max(mag, 1e-12))
        throw NumericalError("residue at " + fmt_c(center) + " differs between radius " +
                             std::to_string(radius) + " and " + std::to_string(radius / 2) +
                             ": non-simple pole or interfering singularity");
    return res;
}

// Cross-check for a simple pole: (t - c) f(t) sampled along a ray toward c,
// extrapolated to zero distance (Richardson, ratio 2).
template <class F>
cplx simple_pole_limit(F&& f, cplx center, cplx direction, double r0, int levels = 6)
{
    direction /= std::abs(direction);
    std::vector<std::vector<cplx>> R(levels);
    for (int k = 0; k < levels; ++k) {
        const cplx w = direction * (r0 / std::pow(2.0, k));
        R[k].push_back(f(center + w) * w);
        for (int m = 1; m <= k; ++m) {
            const double p = std::pow(2.0, m);
            R[k].push_back((p * R[k][m - 1] - R[k - 1][m - 1]) / (p - 1));
        }
    }
    return R.back().back();
}

} // namespace ewkb
