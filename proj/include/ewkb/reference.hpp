#pragma once

#include "ewkb/eigen.hpp"
#include "ewkb/model.hpp"
#include "ewkb/report.hpp"

#include <boost/numeric/odeint.hpp>

#include <cstdio>
#include <optional>
#include <sstream>
#include <vector>

namespace ewkb {

struct SolverConfig {
    double rel_tol = 1e-10;
    double abs_tol = 1e-12;
    double phase_cap = 2.0;        // guard only: step <= phase_cap / (eta max|E|)
    double adiabatic_ratio = 1e-6; // window edge criterion |g| / (eta |dE|)
    double widen_factor = 1.25;
    int max_widenings = 2;
    double window_rel = 1e-3;      // window convergence: |dP| <= max(window_rel P, window_abs)
    double window_abs = 1e-9;
    long max_steps = 2000000;      // between consecutive sample times
    std::optional<double> t0, t1;  // explicit window; disables automatic widening
};

struct Trajectory {
    std::vector<double> t;
    std::vector<std::vector<cplx>> psi;
    double norm_drift = 0; // max over samples of | ||psi||^2 - 1 |
    long steps = 0;
};

using State = std::vector<cplx>;

namespace detail {

// i dpsi/dt = eta H(t) psi with H evaluated entry by entry.
struct SchroedingerRhs {
    const ModelSpec* m;
    double eta;
    mutable Mat h;
    void operator()(const State& y, State& dy, double t) const
    {
        const int n = m->dimension;
        h = evaluate_h(*m, t);
        for (int j = 0; j < n; ++j) {
            cplx s{};
            for (int k = 0; k < n; ++k)
                s += h(j, k) * y[k];
            dy[j] = cplx(0, -eta) * s;
        }
    }
};

inline constexpr double step_tol_factor = 1e-2;

inline double max_energy(const ModelSpec& m, double t0, double t1)
{
    double e = 0;
    const int n = 64;
    for (int k = 0; k <= n; ++k) {
        const double t = t0 + (t1 - t0) * k / n;
        Eigen::ComplexEigenSolver<Mat> es(evaluate_h(m, t), false);
        for (int j = 0; j < es.eigenvalues().size(); ++j)
            e = std::max(e, std::abs(es.eigenvalues()(j)));
    }
    return e;
}

} // namespace detail

// Integrate the Schroedinger equation from times.front() to times.back(),
// recording psi at every requested time.
inline Trajectory integrate(const ModelSpec& m, double eta, const SolverConfig& cfg, const State& psi0,
                            const std::vector<double>& times)
{
    namespace odeint = boost::numeric::odeint;
    if (!(cfg.rel_tol > 0 && cfg.rel_tol <= 1e-3 && cfg.abs_tol > 0 && cfg.abs_tol <= 1e-3))
        throw std::invalid_argument("solver tolerances must lie in (0, 1e-3]");
    if (times.size() < 2)
        throw std::invalid_argument("need at least two sample times");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1]))
            throw std::invalid_argument("sample times must increase");
    const double emax = std::max(detail::max_energy(m, times.front(), times.back()), 1e-12);
    const double cap = cfg.phase_cap / (eta * emax);
    // Per-step error is measured against |psi| only (the default checker also
    // scales by dt |dpsi/dt|) and held well below rel_tol, so that rel_tol
    // bounds the error accumulated over tens of thousands of steps.
    using Stepper = odeint::runge_kutta_fehlberg78<State>;
    using Checker = odeint::default_error_checker<double, odeint::range_algebra, odeint::default_operations>;
    odeint::controlled_runge_kutta<Stepper, Checker> ctrl(Checker(detail::step_tol_factor * cfg.abs_tol, detail::step_tol_factor * cfg.rel_tol, 1.0, 0.0),
                                                          odeint::default_step_adjuster<double, double>(cap));
    detail::SchroedingerRhs rhs{&m, eta, Mat()};
    Trajectory tr;
    State y = psi0;
    double n0 = 0;
    for (auto c : psi0)
        n0 += std::norm(c);
    auto observe = [&](const State& s, double t) {
        tr.t.push_back(t);
        tr.psi.push_back(s);
        double nn = 0;
        for (auto c : s)
            nn += std::norm(c);
        tr.norm_drift = std::max(tr.norm_drift, std::abs(nn - n0));
    };
    try {
        tr.steps = static_cast<long>(
            odeint::integrate_times(ctrl, rhs, y, times.begin(), times.end(), std::min(cap, 1e-3), observe,
                                    odeint::max_step_checker(static_cast<int>(cfg.max_steps))));
    } catch (const std::exception& e) {
        throw NumericalError(std::string("reference integration failed: ") + e.what());
    }
    for (const auto& s : tr.psi)
        for (auto c : s)
            if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                throw NumericalError("reference integration produced non-finite values");
    return tr;
}

// Adiabatic amplitudes <E_j(t)|psi> at real t (labels descending).
inline std::vector<cplx> project_adiabatic(const ModelSpec& m, double t, const State& psi)
{
    const EigenFrame f = real_axis_frame(m, t);
    std::vector<cplx> a(m.dimension);
    for (int j = 0; j < m.dimension; ++j) {
        cplx s{};
        for (int k = 0; k < m.dimension; ++k)
            s += f.left(j, k) * psi[k];
        a[j] = s;
    }
    return a;
}

// Largest |g_jk| / (eta |E_j - E_k|) at real t.
inline double adiabatic_ratio(const ModelSpec& m, double eta, double t)
{
    const EigenFrame f = real_axis_frame(m, t);
    const Mat g = coupling_matrix(m, f);
    double r = 0;
    for (int j = 0; j < f.size(); ++j)
        for (int k = 0; k < f.size(); ++k)
            if (j != k)
                r = std::max(r, std::abs(g(j, k)) / (eta * std::abs(f.energies[j] - f.energies[k])));
    return r;
}

struct Window {
    double t0, t1;
};

// Symmetric window around the turning-point region whose edges satisfy the
// adiabatic-ratio criterion.
inline Window default_window(const ModelSpec& m, double eta, const SolverConfig& cfg,
                             const std::vector<cplx>& turning_points)
{
    double lo = 0, hi = 0, im = 0;
    if (!turning_points.empty()) {
        lo = hi = turning_points.front().real();
        for (auto t : turning_points) {
            lo = std::min(lo, t.real());
            hi = std::max(hi, t.real());
            im = std::max(im, std::abs(t.imag()));
        }
    }
    const double c = 0.5 * (lo + hi);
    double T = std::max(1.0, 0.5 * (hi - lo) + 4 * im);
    for (int it = 0; it < 200; ++it) {
        if (adiabatic_ratio(m, eta, c - T) <= cfg.adiabatic_ratio &&
            adiabatic_ratio(m, eta, c + T) <= cfg.adiabatic_ratio)
            break;
        T *= 1.1;
    }
    return {c - T, c + T};
}

struct NumericRun {
    double probability;
    cplx amplitude;
    double norm_drift;
    long steps;
};

inline NumericRun run_transition(const ModelSpec& m, double eta, int from, int to, Window w,
                                 const SolverConfig& cfg)
{
    const EigenFrame f0 = real_axis_frame(m, w.t0);
    State psi0(m.dimension);
    for (int k = 0; k < m.dimension; ++k)
        psi0[k] = f0.right(k, from);
    auto tr = integrate(m, eta, cfg, psi0, {w.t0, w.t1});
    const auto a = project_adiabatic(m, w.t1, tr.psi.back());
    return {std::norm(a[to]), a[to], tr.norm_drift, tr.steps};
}

// Transition probability from level `from` to level `to` (0-based) by direct
// integration, with window and tolerance convergence checks.
inline TransitionReport numeric_transition_probability(const ModelSpec& m, double eta, int from, int to,
                                                       const SolverConfig& cfg,
                                                       const std::vector<cplx>& turning_points = {})
{
    if (from < 0 || to < 0 || from >= m.dimension || to >= m.dimension)
        throw PreconditionError("level index out of range");
    TransitionReport rep;
    rep.method = "numeric";
    rep.from_level = from + 1;
    rep.to_level = to + 1;
    rep.eta = eta;
    Window w;
    const bool fixed = cfg.t0 && cfg.t1;
    if (fixed)
        w = {*cfg.t0, *cfg.t1};
    else
        w = default_window(m, eta, cfg, turning_points);
    NumericRun run = run_transition(m, eta, from, to, w, cfg);
    double window_change = 0;
    int widenings = 0;
    if (!fixed) {
        bool converged = false;
        for (; widenings < cfg.max_widenings; ++widenings) {
            const double c = 0.5 * (w.t0 + w.t1), T = 0.5 * (w.t1 - w.t0) * cfg.widen_factor;
            const Window wider{c - T, c + T};
            NumericRun r2 = run_transition(m, eta, from, to, wider, cfg);
            window_change = std::abs(r2.probability - run.probability);
            w = wider;
            run = r2;
            if (window_change <= std::max(cfg.window_rel * run.probability, cfg.window_abs)) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw NumericalError("transition probability did not converge under window widening (change " +
                                 std::to_string(window_change) + ")");
    }
    // tolerance sensitivity: repeat with a ten times looser tolerance
    SolverConfig loose = cfg;
    loose.rel_tol *= 10;
    loose.abs_tol *= 10;
    const NumericRun coarse = run_transition(m, eta, from, to, w, loose);
    const double tol_change = std::abs(coarse.probability - run.probability);
    rep.set_probability(run.probability);
    rep.amplitude = run.amplitude;
    rep.error_estimate = tol_change + window_change + 10 * cfg.rel_tol * std::max(run.probability, 1e-3);
    rep.diagnostics["t0"] = w.t0;
    rep.diagnostics["t1"] = w.t1;
    rep.diagnostics["norm_drift"] = run.norm_drift;
    rep.diagnostics["steps"] = static_cast<double>(run.steps);
    rep.diagnostics["window_widenings"] = widenings + (fixed ? 0 : 1);
    rep.diagnostics["window_change"] = window_change;
    rep.diagnostics["tolerance_change"] = tol_change;
    rep.diagnostics["rel_tol"] = cfg.rel_tol;
    if (run.norm_drift > 10 * cfg.rel_tol)
        rep.warnings.push_back("norm drift " + std::to_string(run.norm_drift) + " exceeds 10 x rel_tol");
    return rep;
}

// CSV of a trajectory: time, psi components, adiabatic populations.
inline std::string trajectory_to_csv(const ModelSpec& m, const Trajectory& tr)
{
    std::ostringstream os;
    os << "t";
    for (int k = 0; k < m.dimension; ++k)
        os << ",re_psi" << k + 1 << ",im_psi" << k + 1;
    for (int k = 0; k < m.dimension; ++k)
        os << ",pop" << k + 1;
    os << "\n";
    char buf[40];
    auto num = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return std::string(buf);
    };
    for (std::size_t s = 0; s < tr.t.size(); ++s) {
        os << num(tr.t[s]);
        for (auto c : tr.psi[s])
            os << "," << num(c.real()) << "," << num(c.imag());
        for (auto a : project_adiabatic(m, tr.t[s], tr.psi[s]))
            os << "," << num(std::norm(a));
        os << "\n";
    }
    return os.str();
}

} // namespace ewkb
