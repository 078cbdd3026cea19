#pragma once

#include "ewkb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace ewkb {

// Piecewise-linear contour in the complex t plane. A closed polyline has an
// implicit last segment back to the first vertex.
class PathPolyline {
public:
    PathPolyline() = default;
    PathPolyline(std::vector<cplx> vertices, bool closed = false)
        : v_(std::move(vertices)), closed_(closed)
    {
        if (v_.size() < 2)
            throw std::invalid_argument("PathPolyline needs at least two vertices");
    }

    static PathPolyline segment(cplx a, cplx b) { return PathPolyline({a, b}); }

    // Counterclockwise circle approximated by n chords, starting at angle phi0.
    static PathPolyline circle(cplx center, double radius, int n, double phi0 = 0.0)
    {
        std::vector<cplx> v;
        v.reserve(n);
        for (int k = 0; k < n; ++k)
            v.push_back(center + std::polar(radius, phi0 + 2.0 * M_PI * k / n));
        return PathPolyline(std::move(v), true);
    }

    const std::vector<cplx>& vertices() const { return v_; }
    bool closed() const { return closed_; }
    cplx front() const { return v_.front(); }
    cplx back() const { return closed_ ? v_.front() : v_.back(); }

    std::size_t segment_count() const { return closed_ ? v_.size() : v_.size() - 1; }
    std::pair<cplx, cplx> segment_at(std::size_t i) const
    {
        return {v_[i], v_[(i + 1) % v_.size()]};
    }

    double length() const
    {
        double s = 0;
        for (std::size_t i = 0; i < segment_count(); ++i) {
            auto [a, b] = segment_at(i);
            s += std::abs(b - a);
        }
        return s;
    }

    PathPolyline reversed() const
    {
        std::vector<cplx> r(v_.rbegin(), v_.rend());
        if (closed_) {
            // keep the same starting vertex so the segment set is identical
            std::rotate(r.begin(), r.end() - 1, r.end());
        }
        return PathPolyline(std::move(r), closed_);
    }

    // Concatenate two open paths; the second must start where this one ends.
    PathPolyline then(const PathPolyline& next) const
    {
        if (closed_ || next.closed_)
            throw std::invalid_argument("cannot concatenate closed paths");
        if (std::abs(back() - next.front()) > 1e-12 * (1 + std::abs(back())))
            throw std::invalid_argument("paths do not join");
        std::vector<cplx> v = v_;
        v.insert(v.end(), next.v_.begin() + 1, next.v_.end());
        return PathPolyline(std::move(v));
    }

    // Arc-length coordinate of the point of the path closest to t, and that
    // distance.
    std::pair<double, double> locate(cplx t) const
    {
        double best_d = INFINITY, best_s = 0, s0 = 0;
        for (std::size_t i = 0; i < segment_count(); ++i) {
            auto [a, b] = segment_at(i);
            const cplx d = b - a;
            const double len = std::abs(d);
            double u = len > 0 ? std::real((t - a) * std::conj(d)) / (len * len) : 0.0;
            u = std::clamp(u, 0.0, 1.0);
            const double dist = std::abs(a + u * d - t);
            if (dist < best_d) {
                best_d = dist;
                best_s = s0 + u * len;
            }
            s0 += len;
        }
        return {best_s, best_d};
    }

    cplx point_at(double s) const
    {
        double s0 = 0;
        for (std::size_t i = 0; i < segment_count(); ++i) {
            auto [a, b] = segment_at(i);
            const double len = std::abs(b - a);
            if (s <= s0 + len || i + 1 == segment_count())
                return len > 0 ? a + (b - a) * std::clamp((s - s0) / len, 0.0, 1.0) : a;
            s0 += len;
        }
        return back();
    }

private:
    std::vector<cplx> v_;
    bool closed_ = false;
};

} // namespace ewkb
