#pragma once

#include "ewkb/errors.hpp"
#include "ewkb/model.hpp"
#include "ewkb/path.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

namespace ewkb {

// Labeled eigensystem at one point: right vectors are the columns of `right`,
// left vectors the rows of `left`, with left * right = identity. On the real
// axis of a Hermitian model left = right^dagger; elsewhere the pair is only
// biorthonormal.
struct EigenFrame {
    cplx t;
    std::vector<cplx> energies;
    Mat right;
    Mat left;

    int size() const { return static_cast<int>(energies.size()); }
    Vec v(int j) const { return right.col(j); }
    Eigen::RowVectorXcd u(int j) const { return left.row(j); }

    double min_gap() const
    {
        double g = INFINITY;
        for (int a = 0; a < size(); ++a)
            for (int b = a + 1; b < size(); ++b)
                g = std::min(g, std::abs(energies[a] - energies[b]));
        return g;
    }
};

struct ContinuationOptions {
    double max_step = 0.05;      // in units of t
    double min_overlap = 0.9;    // matched normalized overlap between samples
    double min_step = 1e-13;
};

namespace detail {

struct RawEigen {
    Vec values;
    Mat right;
    Mat left;
};

inline RawEigen raw_eigen(const Mat& h)
{
    Eigen::ComplexEigenSolver<Mat> es(h, true);
    if (es.info() != Eigen::Success)
        throw NumericalError("eigen-decomposition failed");
    RawEigen r{es.eigenvalues(), es.eigenvectors(), Mat()};
    for (int j = 0; j < r.right.cols(); ++j)
        r.right.col(j).normalize();
    Eigen::PartialPivLU<Mat> lu(r.right);
    r.left = lu.inverse();
    if (!r.left.allFinite())
        throw DegeneracyError("eigenvectors are linearly dependent (exceptional point)");
    return r;
}

inline bool is_symmetric(const Mat& h)
{
    return (h - h.transpose()).norm() <= 1e-13 * (1.0 + h.norm());
}

// Fixed gauge at a real anchor point. Symmetric matrices use the complex
// bilinear normalization v^T v = 1 (which parallel transport preserves), the
// others unit 2-norm. In both cases the first clearly nonzero component is
// made real positive (resp. of positive real part).
inline void anchor_gauge(EigenFrame& f, bool symmetric)
{
    for (int j = 0; j < f.size(); ++j) {
        Vec v = f.right.col(j);
        cplx scale;
        int k = 0;
        while (k + 1 < v.size() && std::abs(v(k)) <= 1e-3 * v.norm())
            ++k;
        if (symmetric) {
            scale = 1.0 / std::sqrt(cplx(v.transpose() * v));
            if ((scale * v(k)).real() < 0)
                scale = -scale;
        } else {
            scale = std::abs(v(k)) / v(k) / v.norm();
        }
        f.right.col(j) = v * scale;
    }
    f.left = f.right.partialPivLu().inverse();
}

} // namespace detail

// Eigensystem at a real point with labels sorted by descending Re E and the
// anchor gauge applied.
inline EigenFrame real_axis_frame(const ModelSpec& m, double x)
{
    const Mat h = evaluate_h(m, x);
    auto raw = detail::raw_eigen(h);
    const int n = m.dimension;
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return raw.values(a).real() > raw.values(b).real();
    });
    EigenFrame f;
    f.t = x;
    f.right.resize(n, n);
    for (int j = 0; j < n; ++j) {
        f.energies.push_back(raw.values(idx[j]));
        f.right.col(j) = raw.right.col(idx[j]);
    }
    detail::anchor_gauge(f, detail::is_symmetric(h));
    return f;
}

namespace detail {

// Match the raw eigensystem at t to the labels of prev and transport the
// gauge. Returns the smallest matched overlap (0 if the match is ambiguous).
inline double transport(const EigenFrame& prev, const RawEigen& raw, cplx t, EigenFrame& out)
{
    const int n = prev.size();
    Eigen::MatrixXd o(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const cplx a = prev.left.row(j) * raw.right.col(k);
            const cplx b = raw.left.row(k) * prev.right.col(j);
            o(j, k) = std::abs(a * b);
        }
    std::vector<int> perm(n), best;
    std::iota(perm.begin(), perm.end(), 0);
    double best_score = -INFINITY;
    if (n <= 7) {
        do {
            double s = 0;
            for (int j = 0; j < n; ++j)
                s += std::log(o(j, perm[j]) + 1e-300);
            if (s > best_score) {
                best_score = s;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
    } else {
        std::vector<bool> used(n, false);
        best.assign(n, -1);
        for (int j = 0; j < n; ++j) {
            int kb = -1;
            for (int k = 0; k < n; ++k)
                if (!used[k] && (kb < 0 || o(j, k) > o(j, kb)))
                    kb = k;
            best[j] = kb;
            used[kb] = true;
        }
    }
    double worst = INFINITY;
    for (int j = 0; j < n; ++j)
        worst = std::min(worst, o(j, best[j]));
    out.t = t;
    out.energies.resize(n);
    out.right.resize(n, n);
    out.left.resize(n, n);
    for (int j = 0; j < n; ++j) {
        const int k = best[j];
        const Vec vr = raw.right.col(k);
        const Eigen::RowVectorXcd ur = raw.left.row(k);
        const cplx a = ur * prev.right.col(j);   // u_raw v_old
        const cplx b = prev.left.row(j) * vr;    // u_old v_raw
        cplx c = std::sqrt(a / b);
        if ((c * b).real() < 0)
            c = -c;
        out.energies[j] = raw.values(k);
        out.right.col(j) = c * vr;
        out.left.row(j) = ur / c;
    }
    return worst;
}

} // namespace detail

// Continue a frame along the straight segment to `target`, with adaptive
// steps. Every accepted intermediate frame is passed to `sink` if given.
template <class Sink>
EigenFrame continue_frame(const ModelSpec& m, const EigenFrame& start, cplx target,
                          const ContinuationOptions& opt, Sink&& sink)
{
    EigenFrame cur = start;
    const cplx d = target - start.t;
    const double total = std::abs(d);
    if (total == 0)
        return cur;
    double pos = 0;
    double h = std::min(opt.max_step, total);
    EigenFrame next;
    while (pos < total) {
        h = std::min(h, total - pos);
        const bool last = h >= total - pos;
        const cplx t = last ? target : start.t + d * ((pos + h) / total);
        auto raw = detail::raw_eigen(evaluate_h(m, t));
        const double ov = detail::transport(cur, raw, t, next);
        bool ok = ov >= opt.min_overlap;
        if (ok) {
            const double gap = cur.min_gap();
            for (int j = 0; j < cur.size() && ok; ++j)
                ok = std::abs(next.energies[j] - cur.energies[j]) <= 0.5 * gap;
        }
        if (!ok) {
            h *= 0.5;
            if (h < opt.min_step * (1.0 + std::abs(t)))
                throw DegeneracyError("eigenvalue continuation failed near t = " + fmt_c(t) +
                                      " (degenerate or exceptional point)");
            continue;
        }
        pos = last ? total : pos + h;
        cur = std::move(next);
        sink(cur);
        if (ov > 0.99)
            h = std::min(opt.max_step, 1.5 * h);
    }
    return cur;
}

inline EigenFrame continue_frame(const ModelSpec& m, const EigenFrame& start, cplx target,
                                 const ContinuationOptions& opt = {})
{
    return continue_frame(m, start, target, opt, [](const EigenFrame&) {});
}

// Eigensystem continued along a polyline from a starting frame; keeps the
// accepted samples so that any point on the path can be reached in one hop.
class BranchPath {
public:
    BranchPath() = default;
    BranchPath(const ModelSpec& m, PathPolyline path, const EigenFrame& start,
               ContinuationOptions opt = {})
        : model_(m), path_(std::move(path)), opt_(opt)
    {
        if (std::abs(start.t - path_.front()) > 1e-12 * (1 + std::abs(start.t)))
            throw std::invalid_argument("start frame is not at the path start");
        samples_.push_back(start);
        s_.push_back(0);
        double s0 = 0;
        EigenFrame cur = start;
        for (std::size_t i = 0; i < path_.segment_count(); ++i) {
            auto [a, b] = path_.segment_at(i);
            cur = continue_frame(model_, cur, b, opt_, [&](const EigenFrame& f) {
                samples_.push_back(f);
                s_.push_back(s0 + std::abs(f.t - a));
            });
            s0 += std::abs(b - a);
        }
    }

    const ModelSpec& model() const { return model_; }
    const PathPolyline& path() const { return path_; }
    const EigenFrame& start() const { return samples_.front(); }
    const EigenFrame& end() const { return samples_.back(); }
    const std::vector<EigenFrame>& samples() const { return samples_; }

    EigenFrame frame_at(cplx t) const
    {
        auto [s, dist] = path_.locate(t);
        if (dist > 1e-9 * (1.0 + std::abs(t)))
            throw std::invalid_argument("point " + fmt_c(t) + " is not on the branch path");
        auto it = std::upper_bound(s_.begin(), s_.end(), s);
        const std::size_t k = it == s_.begin() ? 0 : (it - s_.begin()) - 1;
        return continue_frame(model_, samples_[k], t, opt_);
    }

private:
    ModelSpec model_;
    PathPolyline path_;
    ContinuationOptions opt_;
    std::vector<EigenFrame> samples_;
    std::vector<double> s_;
};

// Continuation from an explicit frame, or from the anchor gauge at the path
// start when the start is real.
inline BranchPath eigen_continued(const ModelSpec& m, const PathPolyline& path,
                                  std::optional<EigenFrame> start = std::nullopt,
                                  ContinuationOptions opt = {})
{
    if (!start) {
        const cplx t0 = path.front();
        if (t0.imag() != 0.0)
            throw std::invalid_argument("path must start on the real axis without a start frame");
        start = real_axis_frame(m, t0.real());
    }
    return BranchPath(m, path, *start, opt);
}

// Frames along the real axis in one gauge, transported outward from x_ref.
class RealAxisGauge {
public:
    explicit RealAxisGauge(const ModelSpec& m, double x_ref = 0.0, double spacing = 0.05)
        : model_(m), x_ref_(x_ref), h_(spacing)
    {
        nodes_.emplace(0, real_axis_frame(m, x_ref));
    }

    const ModelSpec& model() const { return model_; }

    EigenFrame frame(double x) const
    {
        const long k = std::lround((x - x_ref_) / h_);
        return continue_frame(model_, node(k), x);
    }

    const EigenFrame& node(long k) const
    {
        auto it = nodes_.find(k);
        if (it != nodes_.end())
            return it->second;
        const long step = k > 0 ? 1 : -1;
        // walk outward from the nearest known node
        long j = k - step;
        while (!nodes_.count(j))
            j -= step;
        for (long i = j + step; i != k + step; i += step) {
            const EigenFrame& prev = nodes_.at(i - step);
            EigenFrame f = continue_frame(model_, prev, x_ref_ + h_ * double(i));
            check_order(f);
            nodes_.emplace(i, std::move(f));
        }
        return nodes_.at(k);
    }

private:
    // On the real axis transported labels must stay in descending order.
    void check_order(const EigenFrame& f) const
    {
        for (int j = 0; j + 1 < f.size(); ++j)
            if (f.energies[j].real() < f.energies[j + 1].real())
                throw DegeneracyError("levels " + std::to_string(j + 1) + " and " +
                                      std::to_string(j + 2) + " cross near t = " +
                                      std::to_string(f.t.real()));
    }

    ModelSpec model_;
    double x_ref_, h_;
    mutable std::map<long, EigenFrame> nodes_;
};

// Nonadiabatic couplings g_jk = i u_j (dH/dt) v_k / (E_j - E_k) in the
// parallel-transport gauge, where the diagonal vanishes.
inline Mat coupling_matrix(const EigenFrame& f, const Mat& dh)
{
    const int n = f.size();
    Mat w = f.left * dh * f.right;
    Mat g = Mat::Zero(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            if (j != k)
                g(j, k) = cplx(0, 1) * w(j, k) / (f.energies[j] - f.energies[k]);
    return g;
}

inline Mat coupling_matrix(const ModelSpec& m, const EigenFrame& f)
{
    return coupling_matrix(f, evaluate_dh(m, f.t));
}

inline cplx delta_e(int i, int j, const BranchPath& branch, cplx t)
{
    const EigenFrame f = branch.frame_at(t);
    return f.energies.at(i) - f.energies.at(j);
}

struct CouplingOptions {
    std::vector<cplx> turning_points; // excluded neighbourhoods
    double exclusion = 1e-3;          // times the turning-point spacing
};

// g_jk = i (d/dt u_j) v_k by central differences of the continued frames.
inline cplx coupling_g(int j, int k, const BranchPath& branch, cplx t, const CouplingOptions& opt = {})
{
    const auto& tps = opt.turning_points;
    if (!tps.empty()) {
        double spacing = INFINITY;
        for (std::size_t a = 0; a < tps.size(); ++a)
            for (std::size_t b = a + 1; b < tps.size(); ++b)
                spacing = std::min(spacing, std::abs(tps[a] - tps[b]));
        if (!std::isfinite(spacing))
            spacing = 1.0;
        for (auto tc : tps)
            if (std::abs(t - tc) < opt.exclusion * spacing)
                throw PreconditionError("coupling requested too close to the turning point " + fmt_c(tc));
    }
    const EigenFrame f = branch.frame_at(t);
    // direction of the path at t
    auto [s, dist] = branch.path().locate(t);
    (void)dist;
    const double len = branch.path().length();
    const double ds = std::min(1e-6 * (1 + len), 0.5 * len);
    cplx dir = branch.path().point_at(std::min(s + ds, len)) - branch.path().point_at(std::max(s - ds, 0.0));
    dir /= std::abs(dir);
    const double h = std::min(1e-4, f.min_gap() / 10.0);
    const EigenFrame fp = continue_frame(branch.model(), f, t + h * dir);
    const EigenFrame fm = continue_frame(branch.model(), f, t - h * dir);
    const Eigen::RowVectorXcd du = (fp.left.row(j) - fm.left.row(j)) / (2.0 * h * dir);
    return cplx(0, 1) * cplx(du * f.right.col(k));
}

// Closed form of g_12 for the two-level power-law sweep with real coupling
// (upper level labelled 1).
inline cplx nlzsm_coupling_closed_form(int n, double v, double delta, cplx t)
{
    const double ad = std::abs(delta);
    const cplx vt = v * std::pow(t, n);
    return cplx(0, 0.5) * ad * v * double(n) * std::pow(t, n - 1) / (ad * ad + vt * vt);
}

} // namespace ewkb
