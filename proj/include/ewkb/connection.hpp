#pragma once

#include "ewkb/eigen.hpp"
#include "ewkb/quadrature.hpp"
#include "ewkb/reference.hpp"
#include "ewkb/report.hpp"
#include "ewkb/residue.hpp"
#include "ewkb/stokes.hpp"
#include "ewkb/turning_points.hpp"

#include <boost/numeric/odeint.hpp>

#include <map>
#include <memory>
#include <sstream>
#include <vector>

namespace ewkb {

// Four times the residues of g_ij and g_ji at a turning point of pair (i, j).
struct GammaResult {
    cplx gamma_ij;
    cplx gamma_ji;
    double radius = 0;
};

struct ThetaResult {
    cplx tan_half;        // tan(theta(t_c) / 2), extrapolated
    double error_estimate = 0;
};

namespace detail {

// g_ab on a circle around a turning point, continued counterclockwise from the
// point facing the real axis. Frames are cached at fixed angles so that any
// point of the circle is one short hop away.
class CircleCoupling {
public:
    CircleCoupling(const BranchAtlas& atlas, int k, double radius, int nodes = 128)
        : m_(&atlas.model()), tc_(atlas.turning_points()[k].location), r_(radius)
    {
        const bool upper = tc_.imag() > 0;
        phi0_ = upper ? -M_PI / 2 : M_PI / 2;
        EigenFrame f = continue_frame(*m_, atlas.anchor(k).end(), tc_ + std::polar(r_, phi0_));
        frames_.push_back(f);
        for (int j = 1; j <= nodes; ++j) {
            f = continue_frame(*m_, f, tc_ + std::polar(r_, phi0_ + 2 * M_PI * j / nodes));
            frames_.push_back(f);
        }
    }

    double start_angle() const { return phi0_; }

    EigenFrame frame(cplx t) const
    {
        double phi = std::arg(t - tc_);
        while (phi < phi0_)
            phi += 2 * M_PI;
        while (phi >= phi0_ + 2 * M_PI)
            phi -= 2 * M_PI;
        const int n = static_cast<int>(frames_.size()) - 1;
        int j = static_cast<int>(std::floor((phi - phi0_) / (2 * M_PI) * n + 1e-9));
        j = std::clamp(j, 0, n - 1);
        return continue_frame(*m_, frames_[j], t);
    }

    cplx g(int a, int b, cplx t) const
    {
        const EigenFrame f = frame(t);
        return coupling_matrix(*m_, f)(a, b);
    }

private:
    const ModelSpec* m_;
    cplx tc_;
    double r_;
    double phi0_;
    std::vector<EigenFrame> frames_;
};

} // namespace detail

// Gamma = 4 Res g_ij at the turning point, from branch-tracked couplings on
// two circles (radius and radius/2).
inline GammaResult gamma_coefficient(const BranchAtlas& atlas, int k)
{
    const auto& tp = atlas.turning_points().at(k);
    if (tp.order != 1)
        throw PreconditionError("turning point " + fmt_c(tp.location) + " is not simple");
    const double rho = 0.3 * atlas.local_scale(k);
    detail::CircleCoupling outer(atlas, k, rho), inner(atlas, k, 0.5 * rho);
    auto pick = [&](cplx t) -> const detail::CircleCoupling& {
        return std::abs(std::abs(t - tp.location) - rho) < 0.25 * rho ? outer : inner;
    };
    const int a = tp.level_i, b = tp.level_j;
    ResidueOptions ro;
    ro.start_angle = outer.start_angle();
    auto gab = [&](cplx t) { return pick(t).g(a, b, t); };
    auto gba = [&](cplx t) { return pick(t).g(b, a, t); };
    GammaResult r;
    r.gamma_ij = 4.0 * residue_at(gab, tp.location, rho, ro).value;
    r.gamma_ji = 4.0 * residue_at(gba, tp.location, rho, ro).value;
    r.radius = rho;
    return r;
}

// tan(theta/2) at the turning point, from integrating
// dtheta/dt = i (g_ij - g_ji) from the real axis along the anchor path and
// extrapolating the approach to the turning point.
inline ThetaResult theta_at_tp(const BranchAtlas& atlas, int k)
{
    const ModelSpec& m = atlas.model();
    const auto& tp = atlas.turning_points().at(k);
    const int a = tp.level_i, b = tp.level_j;
    const cplx tc = tp.location;
    const cplx inward = tc.imag() > 0 ? cplx(0, -1) : cplx(0, 1); // from t_c toward the axis
    const double rf = atlas.foot_radius(k);
    const int levels = 7;
    std::vector<double> delta(levels);
    for (int j = 0; j < levels; ++j)
        delta[j] = 0.8 * rf / std::pow(4.0, j);
    std::vector<cplx> pts = atlas.anchor(k).path().vertices();
    pts.push_back(tc + inward * delta.back());
    BranchPath path(m, PathPolyline(pts), atlas.anchor(k).start());

    double theta0 = M_PI / 2;
    if (m.dimension == 2) {
        const Mat h = evaluate_h(m, pts.front().real());
        theta0 = std::atan2(std::abs(h(0, 1)), 0.5 * (h(0, 0) - h(1, 1)).real());
    }
    auto f = [&](cplx t) {
        const Mat g = coupling_matrix(m, path.frame_at(t));
        return cplx(0, 1) * (g(a, b) - g(b, a));
    };
    QuadratureOptions qo;
    qo.rel_tol = 1e-9;
    qo.abs_tol = 1e-11;
    std::vector<cplx> prefix(pts.begin(), pts.end() - 1);
    prefix.push_back(tc + inward * delta[0]);
    cplx theta = theta0 + integrate_path(f, PathPolyline(prefix), qo).value;
    std::vector<std::vector<cplx>> R(levels);
    R[0].push_back(std::tan(0.5 * theta));
    for (int j = 1; j < levels; ++j) {
        theta += integrate_path(f, PathPolyline::segment(tc + inward * delta[j - 1], tc + inward * delta[j]), qo).value;
        R[j].push_back(std::tan(0.5 * theta));
        for (int q = 1; q <= j; ++q) {
            const double p = std::pow(2.0, q); // expansion in powers of sqrt(delta)
            R[j].push_back((p * R[j][q - 1] - R[j - 1][q - 1]) / (p - 1));
        }
    }
    ThetaResult res;
    res.tan_half = R[levels - 1][levels - 1];
    res.error_estimate = std::abs(R[levels - 1][levels - 1] - R[levels - 2][levels - 2]);
    if (!std::isfinite(res.tan_half.real()) || !std::isfinite(res.tan_half.imag()))
        throw NumericalError("theta integration toward " + fmt_c(tc) + " did not converge");
    return res;
}

// Integral of (E_i - E_j) from real t0 to the turning point: along the real
// axis to the anchor path, up the anchor path to the foot, then to t_c.
inline cplx action_integral(const BranchAtlas& atlas, int k, double t0)
{
    const ModelSpec& m = atlas.model();
    const auto& tp = atlas.turning_points().at(k);
    const int a = tp.level_i, b = tp.level_j;
    const BranchPath& anchor = atlas.anchor(k);
    const double x0 = anchor.path().front().real();
    QuadratureOptions qo;
    qo.rel_tol = 1e-13;
    qo.abs_tol = 1e-15;
    cplx total{};
    if (x0 != t0) {
        auto real_gap = [&](cplx x) {
            const Mat h = evaluate_h(m, x);
            Eigen::ComplexEigenSolver<Mat> es(h, false);
            std::vector<cplx> e(es.eigenvalues().data(), es.eigenvalues().data() + m.dimension);
            std::sort(e.begin(), e.end(), [](cplx p, cplx q) { return p.real() > q.real(); });
            return e[a] - e[b];
        };
        total += integrate_path(real_gap, PathPolyline::segment(t0, x0), qo).value;
    }
    auto path_gap = [&](cplx t) {
        const EigenFrame f = anchor.frame_at(t);
        return f.energies[a] - f.energies[b];
    };
    total += integrate_path(path_gap, anchor.path(), qo).value;
    const EigenFrame& foot = anchor.end();
    total -= integral_from_turning_point(m, tp.location, foot.t, foot.energies[a] - foot.energies[b], qo).value;
    return total;
}

struct PrefactorResult {
    cplx exponent;  // -i eta integral of (E_dominant - E_subdominant)
    cplx prefactor; // exp(exponent)
};

// Exponential factor of a connection step whose dominant level is `dominant`
// (one of the pair of turning point k).
inline PrefactorResult exp_prefactor(const BranchAtlas& atlas, int k, double t0, double eta, int dominant)
{
    const auto& tp = atlas.turning_points().at(k);
    if (dominant != tp.level_i && dominant != tp.level_j)
        throw std::invalid_argument("dominant level is not part of the turning point's pair");
    const cplx A = action_integral(atlas, k, t0);
    const cplx x = cplx(0, -eta) * (dominant == tp.level_i ? A : -A);
    return {x, std::exp(x)};
}

// One real-axis crossing of a Stokes line.
struct ConnectionStep {
    int line = -1;
    double crossing = 0;
    cplx tp;              // turning point whose coefficients are used
    int level_i = 0, level_j = 1;
    int dominant = 0, subdominant = 1;
    int orientation = 1;  // +1: counterclockwise about tp (Im t_c > 0)
    cplx coefficient;     // -Gamma_{subdominant, dominant}
    cplx action;          // integral of (E_i - E_j) from t_ref to tp
    cplx prefactor;       // exp(-i eta integral of (E_dom - E_sub))

    cplx entry() const { return double(orientation) * coefficient * prefactor; }

    void set_eta(double eta)
    {
        const cplx A = dominant == level_i ? action : -action;
        prefactor = std::exp(cplx(0, -eta) * A);
    }
};

// Factor acting on WKB coefficient columns: identity plus the entry in
// (row subdominant, column dominant).
inline Mat step_matrix(const ConnectionStep& s, int n)
{
    Mat f = Mat::Identity(n, n);
    f(s.subdominant, s.dominant) += s.entry();
    return f;
}

struct TransferMatrix {
    Mat entries;
    std::vector<ConnectionStep> provenance;
    int dimension() const { return static_cast<int>(entries.rows()); }
};

inline TransferMatrix compose(const std::vector<ConnectionStep>& steps, int n)
{
    TransferMatrix t;
    t.entries = Mat::Identity(n, n);
    for (const auto& s : steps) {
        t.entries = step_matrix(s, n) * t.entries; // later crossings on the left
        t.provenance.push_back(s);
    }
    return t;
}

// Per-turning-point coefficients of the physical model, computed on demand.
class ConnectionData {
public:
    ConnectionData(const ModelSpec& m, double t_ref) : atlas_(std::make_shared<BranchAtlas>(m)), t_ref_(t_ref) {}

    const BranchAtlas& atlas() const { return *atlas_; }
    double t_ref() const { return t_ref_; }

    const GammaResult& gamma(int k)
    {
        auto it = gamma_.find(k);
        if (it == gamma_.end())
            it = gamma_.emplace(k, gamma_coefficient(*atlas_, k)).first;
        return it->second;
    }
    cplx action(int k)
    {
        auto it = action_.find(k);
        if (it == action_.end())
            it = action_.emplace(k, action_integral(*atlas_, k, t_ref_)).first;
        return it->second;
    }

private:
    std::shared_ptr<BranchAtlas> atlas_;
    double t_ref_;
    std::map<int, GammaResult> gamma_;
    std::map<int, cplx> action_;
};

struct EwkbOptions {
    std::optional<double> t_ref;     // exponent reference; default left of all crossings
    double t_begin = -INFINITY;      // crossings outside (t_begin, t_end) are skipped
    double t_end = INFINITY;
    GraphOptions graph;
};

// Graph plus connection steps, independent of eta.
struct EwkbPlan {
    ModelSpec model;
    StokesGraph graph;
    double t_ref = 0;
    std::vector<ConnectionStep> steps;
    std::vector<std::string> warnings;
    int skipped_crossings = 0;

    TransferMatrix transfer(double eta) const
    {
        std::vector<ConnectionStep> s = steps;
        for (auto& x : s)
            x.set_eta(eta);
        return compose(s, model.dimension);
    }
};

// Build the Stokes graph (escalating epsilon if needed) and attach the
// coefficients of the physical model to every principal real crossing.
inline EwkbPlan plan_ewkb(const ModelSpec& m, const EwkbOptions& opt = {})
{
    EwkbPlan plan;
    plan.model = m;
    plan.graph = build_graph(m, opt.graph);
    if (plan.graph.degenerate()) {
        std::string msg = "unresolved Stokes-graph degeneracy";
        for (const auto& d : plan.graph.degeneracies)
            msg += "; " + d;
        throw DegeneracyError(msg);
    }
    if (plan.graph.escalated)
    {
        std::ostringstream w;
        w << "degenerate Stokes graph resolved with epsilon = " << plan.graph.epsilon_used;
        plan.warnings.push_back(w.str());
    }
    const auto crossings = plan.graph.ordered_crossings();
    double t_ref = 0;
    if (opt.t_ref)
        t_ref = *opt.t_ref;
    else if (!crossings.empty())
        t_ref = std::floor(crossings.front().x) - 1.0;
    plan.t_ref = t_ref;
    // the loss only selects the graph topology; coefficients belong to the physical model
    ConnectionData data(m.with_epsilon(0.0), t_ref);
    for (const auto& l : plan.graph.lines)
        for (const auto& c : l.crossings)
            if (!c.principal)
                ++plan.skipped_crossings;
    if (plan.skipped_crossings)
        plan.warnings.push_back(std::to_string(plan.skipped_crossings) +
                                " Stokes-line crossing(s) off the principal sheet ignored");
    for (const auto& c : crossings) {
        if (!(c.x > opt.t_begin && c.x < opt.t_end))
            continue;
        const StokesLine& l = plan.graph.lines[c.line];
        const TurningPoint& gtp = plan.graph.turning_points[l.tp];
        const int k = data.atlas().nearest(gtp.location, l.level_i, l.level_j);
        if (k < 0)
            throw NumericalError("no turning point of the physical model matches " + fmt_c(gtp.location));
        const TurningPoint& tp = data.atlas().turning_points()[k];
        if (std::abs(tp.location - gtp.location) > 0.25 * data.atlas().local_scale(k))
            plan.warnings.push_back("loss shifted turning point " + fmt_c(tp.location) + " to " +
                                    fmt_c(gtp.location));
        ConnectionStep s;
        s.line = l.id;
        s.crossing = c.x;
        s.tp = tp.location;
        s.level_i = tp.level_i;
        s.level_j = tp.level_j;
        s.dominant = l.dominant;
        s.subdominant = l.subdominant;
        s.orientation = tp.location.imag() > 0 ? 1 : -1;
        const GammaResult& g = data.gamma(k);
        s.coefficient = -(s.dominant == tp.level_i ? g.gamma_ji : g.gamma_ij);
        s.action = data.action(k);
        s.set_eta(m.eta);
        plan.steps.push_back(s);
    }
    return plan;
}

// Product over the crossings in (t0, t1), exponents referred to t0.
inline TransferMatrix transfer_product(const ModelSpec& m, double t0, double t1, GraphOptions graph = {})
{
    if (!(t0 < t1))
        throw std::invalid_argument("transfer_product needs t0 < t1");
    EwkbOptions o;
    o.t_ref = t0;
    o.t_begin = t0;
    o.t_end = t1;
    o.graph = graph;
    return plan_ewkb(m, o).transfer(m.eta);
}

inline TransitionReport report_from_plan(const EwkbPlan& plan, int from, int to, double eta)
{
    const int n = plan.model.dimension;
    if (from < 0 || to < 0 || from >= n || to >= n)
        throw PreconditionError("level index out of range");
    const TransferMatrix t = plan.transfer(eta);
    TransitionReport r;
    r.method = "ewkb";
    r.from_level = from + 1;
    r.to_level = to + 1;
    r.eta = eta;
    const cplx amp = t.entries(to, from);
    r.amplitude = amp;
    r.set_probability(std::norm(amp));
    for (const auto& s : t.provenance)
        r.steps.push_back({s.crossing, s.tp, s.orientation, s.level_i + 1, s.level_j + 1, s.dominant + 1,
                           s.coefficient, s.prefactor});
    r.diagnostics["t_ref"] = plan.t_ref;
    r.diagnostics["epsilon_graph"] = plan.graph.epsilon_used;
    r.diagnostics["crossings"] = static_cast<double>(t.provenance.size());
    r.diagnostics["determinant_error"] = std::abs(t.entries.determinant() - 1.0);
    r.warnings = plan.warnings;
    return r;
}

inline TransitionReport transition_probability_ewkb(const ModelSpec& m, int from, int to,
                                                    const EwkbOptions& opt = {})
{
    return report_from_plan(plan_ewkb(m, opt), from, to, m.eta);
}

namespace detail {

inline void require_two_level(const ModelSpec& m, const char* method)
{
    if (m.dimension != 2)
        throw PreconditionError(std::string(method) + " applies to two-level models only");
}

struct UpperTerm {
    cplx tp;
    cplx action21; // integral of (E_2 - E_1) from t0 to tp
    GammaResult gamma;
};

inline std::vector<UpperTerm> upper_terms(const ModelSpec& m, double t0)
{
    BranchAtlas atlas(m);
    std::vector<UpperTerm> out;
    for (std::size_t k = 0; k < atlas.turning_points().size(); ++k) {
        const auto& tp = atlas.turning_points()[k];
        if (!tp.upper())
            continue;
        out.push_back({tp.location, -action_integral(atlas, static_cast<int>(k), t0),
                       gamma_coefficient(atlas, static_cast<int>(k))});
    }
    if (out.empty())
        throw PreconditionError("no turning points in the upper half plane");
    return out;
}

} // namespace detail

// Dykhne-Davis-Pechukas sum over upper-half-plane turning points, with
// arg g_12(t_c) from the residue seen along the vertical approach from below.
inline double ddp_probability(const ModelSpec& m, double t0 = 0.0)
{
    detail::require_two_level(m, "DDP");
    cplx sum{};
    for (const auto& u : detail::upper_terms(m, t0)) {
        const double arg_g = std::arg(u.gamma.gamma_ij) + M_PI / 2;
        sum += std::exp(cplx(0, -m.eta) * u.action21 - cplx(0, arg_g));
    }
    return std::norm(sum);
}

// Generalized DDP: sum of Gamma_k times the exponential factors.
inline double gddp_probability(const ModelSpec& m, double t0 = 0.0)
{
    detail::require_two_level(m, "GDDP");
    cplx sum{};
    for (const auto& u : detail::upper_terms(m, t0))
        sum += u.gamma.gamma_ij * std::exp(cplx(0, -m.eta) * u.action21);
    return std::norm(sum);
}

// First-order adiabatic perturbation theory for the amplitude of level 1 when
// starting in level 2: c_1 = -i integral of exp(-i eta int (E_2 - E_1)) g_12.
inline cplx perturbative_amplitude(const ModelSpec& m, double t0, double t1, double rel_tol = 1e-10)
{
    namespace odeint = boost::numeric::odeint;
    detail::require_two_level(m, "perturbative amplitude");
    if (!(t0 < t1))
        throw std::invalid_argument("perturbative_amplitude needs t0 < t1");
    RealAxisGauge gauge(m, 0.5 * (t0 + t1));
    // state: phase integral (real part used) and accumulated amplitude
    using S = std::vector<cplx>;
    auto rhs = [&](const S& y, S& dy, double t) {
        const EigenFrame f = gauge.frame(t);
        const Mat g = coupling_matrix(m, f);
        dy[0] = m.eta * (f.energies[1] - f.energies[0]);
        dy[1] = std::exp(cplx(0, -1) * y[0]) * g(0, 1);
    };
    const double emax = detail::max_energy(m, t0, t1);
    const double cap = 0.2 / (m.eta * std::max(2 * emax, 1e-12));
    odeint::runge_kutta_fehlberg78<S> st;
    auto ctrl = odeint::make_controlled(1e-13, rel_tol, cap, st);
    S y = {0.0, 0.0};
    try {
        odeint::integrate_adaptive(ctrl, rhs, y, t0, t1, std::min(cap, 1e-3));
    } catch (const std::exception& e) {
        throw NumericalError(std::string("perturbative integration failed: ") + e.what() +
                             "; partial value " + fmt_c(cplx(0, -1) * y[1]));
    }
    return cplx(0, -1) * y[1];
}

} // namespace ewkb
