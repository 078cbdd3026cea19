#pragma once

#include "ewkb/eigen.hpp"
#include "ewkb/model.hpp"
#include "ewkb/quadrature.hpp"
#include "ewkb/roots.hpp"

#include <memory>
#include <vector>

namespace ewkb {

// Complex time where levels i < j (0-based, descending-energy labels from the
// real axis) coincide.
struct TurningPoint {
    cplx location;
    int level_i = 0;
    int level_j = 1;
    int order = 1;
    bool upper() const { return location.imag() > 0; }
};

struct AtlasOptions {
    double gauge_ref = 0.0;     // real point where the global gauge is fixed
    double foot_fraction = 1e-3; // foot radius relative to the local length scale
};

// Zeros of the discriminant of H(t): every complex time where some pair of
// eigenvalues coincides, with multiplicity.
inline std::vector<LocatedZero> discriminant_zeros(const ModelSpec& m)
{
    const double R = discriminant_root_bound(m);
    if (R == 0.0)
        return {};
    const double L = 1.1 * R + 1e-3;
    auto d = [&](cplx t) { return discriminant(m, t); };
    // the real axis is a cell boundary from the start: no zeros there
    std::vector<LocatedZero> all;
    for (const Rect& r : {Rect{-L, L, 0.0, L}, Rect{-L, L, -L, 0.0}}) {
        auto z = find_zeros(d, r, 1e-7 * (1 + R));
        all.insert(all.end(), z.begin(), z.end());
    }
    for (auto& z : all) {
        if (std::abs(z.z.imag()) < 1e-9 * (1 + R))
            throw ModelError("degeneracy on the real axis at t = " + fmt_c(z.z));
    }
    std::sort(all.begin(), all.end(), [](const LocatedZero& a, const LocatedZero& b) {
        return lex_less(a.z, b.z);
    });
    return all;
}

namespace detail {

// Distance from t to its nearest neighbour in pts (excluding itself).
inline double nearest_other(const std::vector<cplx>& pts, cplx t)
{
    double d = INFINITY;
    for (auto p : pts)
        if (p != t)
            d = std::min(d, std::abs(p - t));
    return d;
}

} // namespace detail

// Turning points of a model together with the continuation data that fixes
// which pair of levels each belongs to: a global real-axis gauge and, per
// turning point, a path from the real axis to a foot point a short distance
// from it on the side facing the real axis.
class BranchAtlas {
public:
    explicit BranchAtlas(const ModelSpec& m, AtlasOptions opt = {})
        : model_(m), opt_(opt), gauge_(std::make_shared<RealAxisGauge>(m, opt.gauge_ref))
    {
        auto zeros = discriminant_zeros(m);
        std::vector<cplx> locs;
        for (auto& z : zeros)
            locs.push_back(z.z);
        for (auto& z : zeros) {
            TurningPoint tp;
            tp.location = z.z;
            tp.order = z.order;
            tps_.push_back(tp);
        }
        scale_.resize(tps_.size());
        for (std::size_t k = 0; k < tps_.size(); ++k) {
            const cplx t = tps_[k].location;
            scale_[k] = std::min({1.0, detail::nearest_other(locs, t), std::abs(t.imag())});
        }
        anchors_.resize(tps_.size());
        for (std::size_t k = 0; k < tps_.size(); ++k) {
            build_anchor(k, locs);
            const auto& foot = anchors_[k]->end();
            // the pair is the two continued levels that nearly coincide at the foot
            double best = INFINITY;
            for (int a = 0; a < m.dimension; ++a)
                for (int b = a + 1; b < m.dimension; ++b) {
                    const double g = std::abs(foot.energies[a] - foot.energies[b]);
                    if (g < best) {
                        best = g;
                        tps_[k].level_i = a;
                        tps_[k].level_j = b;
                    }
                }
        }
    }

    const ModelSpec& model() const { return model_; }
    const RealAxisGauge& gauge() const { return *gauge_; }
    const std::vector<TurningPoint>& turning_points() const { return tps_; }
    std::vector<cplx> locations() const
    {
        std::vector<cplx> v;
        for (auto& t : tps_)
            v.push_back(t.location);
        return v;
    }

    // Local length scale: min(1, nearest other turning point, distance to the axis).
    double local_scale(std::size_t k) const { return scale_[k]; }
    double foot_radius(std::size_t k) const { return opt_.foot_fraction * scale_[k]; }
    const BranchPath& anchor(std::size_t k) const { return *anchors_[k]; }
    cplx foot(std::size_t k) const { return anchors_[k]->end().t; }

    // Index of the turning point of the same pair closest to t, or -1.
    int nearest(cplx t, int level_i = -1, int level_j = -1) const
    {
        int best = -1;
        double bd = INFINITY;
        for (std::size_t k = 0; k < tps_.size(); ++k) {
            if (level_i >= 0 && (tps_[k].level_i != level_i || tps_[k].level_j != level_j))
                continue;
            const double d = std::abs(tps_[k].location - t);
            if (d < bd) {
                bd = d;
                best = static_cast<int>(k);
            }
        }
        return best;
    }

private:
    void build_anchor(std::size_t k, const std::vector<cplx>& locs)
    {
        const cplx tc = tps_[k].location;
        const double sgn = tc.imag() > 0 ? 1.0 : -1.0;
        const cplx foot = tc - cplx(0, sgn * foot_radius(k));
        // keep the vertical leg clear of other turning points (and their cuts)
        const double clear = 0.25 * scale_[k];
        double shift = 0;
        for (int attempt = 0; attempt < 9; ++attempt) {
            shift = attempt == 0 ? 0.0 : clear * ((attempt + 1) / 2) * (attempt % 2 ? 1.0 : -1.0);
            const double x = tc.real() + shift;
            bool blocked = false;
            for (auto p : locs) {
                if (p == tc)
                    continue;
                const bool between = sgn > 0 ? (p.imag() > -clear && p.imag() < tc.imag() + clear)
                                             : (p.imag() < clear && p.imag() > tc.imag() - clear);
                if (between && std::abs(p.real() - x) < clear)
                    blocked = true;
            }
            if (!blocked)
                break;
        }
        std::vector<cplx> pts = {tc.real() + shift, cplx(tc.real() + shift, foot.imag())};
        if (shift != 0)
            pts.push_back(foot);
        const double x0 = pts.front().real();
        anchors_[k] = std::make_shared<BranchPath>(model_, PathPolyline(pts), gauge_->frame(x0));
    }

    ModelSpec model_;
    AtlasOptions opt_;
    std::shared_ptr<RealAxisGauge> gauge_;
    std::vector<TurningPoint> tps_;
    std::vector<double> scale_;
    std::vector<std::shared_ptr<BranchPath>> anchors_;
};

inline std::vector<TurningPoint> find_all_turning_points(const ModelSpec& m)
{
    return BranchAtlas(m).turning_points();
}

// Turning points of one pair (0-based levels, any order), optionally
// restricted to a window.
inline std::vector<TurningPoint> find_turning_points(const ModelSpec& m, int i, int j,
                                                     std::optional<Rect> window = std::nullopt)
{
    if (i > j)
        std::swap(i, j);
    if (i < 0 || j >= m.dimension || i == j)
        throw std::invalid_argument("invalid level pair");
    std::vector<TurningPoint> out;
    for (const auto& tp : find_all_turning_points(m))
        if (tp.level_i == i && tp.level_j == j && (!window || window->contains(tp.location)))
            out.push_back(tp);
    return out;
}

// Gap between the two members of a nearly degenerate pair, computed from the
// discriminant so that it stays accurate right at the turning point. The sign
// is not determined; the value closest to `hint` (if nonzero) is returned.
inline cplx pair_gap_near(const ModelSpec& m, cplx t, cplx hint)
{
    const Mat h = evaluate_h(m, t);
    const cplx d = matrix_discriminant(h);
    cplx q = d;
    if (m.dimension > 2) {
        Eigen::ComplexEigenSolver<Mat> es(h, false);
        const Vec lam = es.eigenvalues();
        int pa = 0, pb = 1;
        double best = INFINITY;
        for (int a = 0; a < lam.size(); ++a)
            for (int b = a + 1; b < lam.size(); ++b)
                if (std::abs(lam(a) - lam(b)) < best) {
                    best = std::abs(lam(a) - lam(b));
                    pa = a;
                    pb = b;
                }
        cplx rest = 1.0;
        for (int a = 0; a < lam.size(); ++a)
            for (int b = a + 1; b < lam.size(); ++b)
                if (!(a == pa && b == pb))
                    rest *= (lam(a) - lam(b)) * (lam(a) - lam(b));
        q = d / rest;
    }
    cplx g = std::sqrt(q);
    if (hint != cplx{} && std::abs(g + hint) < std::abs(g - hint))
        g = -g;
    return g;
}

// Integral of (E_a - E_b) from the turning point tc to a nearby t, given the
// continued value of E_a - E_b at t. Uses t = tc + (t - tc) u^2, in which the
// integrand is smooth.
inline QuadratureResult integral_from_turning_point(const ModelSpec& m, cplx tc, cplx t, cplx gap_at_t,
                                                    QuadratureOptions opt = {})
{
    const cplx L = t - tc;
    // sqrt(q)/u is analytic and nonvanishing along the ray; track its sign
    auto f = [&](cplx uu) {
        const double u = uu.real();
        if (u == 0.0)
            return cplx{};
        const cplx g = pair_gap_near(m, tc + L * (u * u), gap_at_t * u);
        return g * 2.0 * u * L;
    };
    return integrate_path(f, PathPolyline::segment(0.0, 1.0), opt);
}

} // namespace ewkb
