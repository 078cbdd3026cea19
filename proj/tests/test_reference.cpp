#include <catch_amalgamated.hpp>

#include "ewkb/reference.hpp"
#include "ewkb/turning_points.hpp"

#include <cmath>

using namespace ewkb;
using Catch::Approx;

namespace {

ModelSpec lz(double eta = 1.0) { return builtin("nlzsm", {{"n", 1}, {"eta", eta}}); }

ModelSpec diagonal(std::vector<double> d)
{
    ModelSpec m;
    m.dimension = static_cast<int>(d.size());
    m.entries.assign(d.size() * d.size(), Polynomial::constant(0.0));
    for (std::size_t j = 0; j < d.size(); ++j)
        m.entries[j * d.size() + j] = Polynomial({d[j], 0.1 * double(j)});
    return m;
}

// p(c - s) with conjugated coefficients
Polynomial reflect_conj(const Polynomial& p, double c)
{
    std::vector<cplx> out(p.coeffs.size(), 0.0);
    for (std::size_t k = 0; k < p.coeffs.size(); ++k) {
        // (c - s)^k = sum_j binom(k, j) c^(k-j) (-s)^j
        double binom = 1;
        for (std::size_t j = 0; j <= k; ++j) {
            out[j] += std::conj(p.coeffs[k]) * binom * std::pow(c, double(k - j)) * (j % 2 ? -1.0 : 1.0);
            binom = binom * double(k - j) / double(j + 1);
        }
    }
    return Polynomial(out);
}

double norm2(const State& s)
{
    double n = 0;
    for (auto c : s)
        n += std::norm(c);
    return n;
}

} // namespace

TEST_CASE("pure phase evolution", "[reference]")
{
    const ModelSpec m = diagonal({1.0, -0.5, 2.0});
    std::vector<double> times;
    for (int k = 0; k <= 20; ++k)
        times.push_back(-5 + 0.5 * k);
    const auto tr = integrate(m, 2.0, SolverConfig{}, {1.0, 0.0, 0.0}, times);
    REQUIRE(tr.psi.size() == times.size());
    for (const auto& s : tr.psi) {
        CHECK(std::abs(std::abs(s[0]) - 1.0) < 1e-10);
        CHECK(std::abs(s[1]) == 0.0);
    }
}

TEST_CASE("unitarity on the linear model", "[reference]")
{
    const ModelSpec m = lz();
    SolverConfig cfg;
    const EigenFrame f = real_axis_frame(m, -20);
    const auto tr = integrate(m, 1.0, cfg, {f.right(0, 1), f.right(1, 1)}, {-20.0, 0.0, 20.0});
    CHECK(tr.norm_drift <= 1e-8);
    CHECK(tr.norm_drift <= 10 * cfg.rel_tol);
}

TEST_CASE("solver configuration is checked", "[reference]")
{
    SolverConfig bad;
    bad.rel_tol = 1e-2;
    CHECK_THROWS_AS(integrate(lz(), 1.0, bad, {1.0, 0.0}, {0.0, 1.0}), std::invalid_argument);
    CHECK_THROWS_AS(integrate(lz(), 1.0, SolverConfig{}, {1.0, 0.0}, {1.0, 0.0}), std::invalid_argument);
    SolverConfig tiny;
    tiny.max_steps = 10;
    CHECK_THROWS_AS(integrate(lz(), 1.0, tiny, {1.0, 0.0}, {-20.0, 20.0}), NumericalError);
}

TEST_CASE("adiabatic projection", "[reference]")
{
    const ModelSpec m = lz();
    // H(0) = sigma_x: |<E_1|e_1>|^2 = 1/2
    const auto a = project_adiabatic(m, 0.0, {1.0, 0.0});
    CHECK(std::norm(a[0]) == Approx(0.5).epsilon(1e-12));
    CHECK(std::norm(a[0]) + std::norm(a[1]) == Approx(1.0).epsilon(1e-12));

    const ModelSpec l3 = builtin("lzsm3", {});
    const EigenFrame f = real_axis_frame(l3, 0.7);
    const State e2 = {f.right(0, 1), f.right(1, 1), f.right(2, 1)};
    const auto b = project_adiabatic(l3, 0.7, e2);
    CHECK(std::abs(b[0]) < 1e-12);
    CHECK(std::abs(std::abs(b[1]) - 1.0) < 1e-12);
    CHECK(std::abs(b[2]) < 1e-12);
    const State mixed = {cplx(0.3, 0.1), cplx(-0.2, 0.4), cplx(0.5, -0.6)};
    double s = 0;
    for (auto c : project_adiabatic(l3, -1.3, mixed))
        s += std::norm(c);
    CHECK(s == Approx(norm2(mixed)).epsilon(1e-12));
}

TEST_CASE("three-level populations stay normalized", "[reference]")
{
    const ModelSpec m = builtin("lzsm3", {});
    const EigenFrame f = real_axis_frame(m, -12);
    const State g = {f.right(0, 2), f.right(1, 2), f.right(2, 2)};
    const auto tr = integrate(m, 1.0, SolverConfig{}, g, {-12.0, 8.0});
    double s = 0;
    for (auto c : project_adiabatic(m, 8.0, tr.psi.back()))
        s += std::norm(c);
    CHECK(std::abs(s - 1.0) <= 1e-8);
}

TEST_CASE("linear model transition probability", "[reference]")
{
    BranchAtlas a(lz());
    const auto r = numeric_transition_probability(lz(), 1.0, 1, 0, SolverConfig{}, a.locations());
    CHECK(r.probability == Approx(std::exp(-M_PI)).epsilon(0.01));
    CHECK(r.method == "numeric");
    CHECK(r.diagnostics.at("norm_drift") <= 1e-8);
    CHECK(std::abs(r.probability - std::norm(*r.amplitude)) < 1e-12);
    REQUIRE(r.error_estimate);
    CHECK(*r.error_estimate < 1e-4);

    const auto r5 = numeric_transition_probability(lz(5), 5.0, 1, 0, SolverConfig{}, a.locations());
    const double p5 = std::exp(-5 * M_PI);
    CHECK(r5.probability > p5 / 1.5);
    CHECK(r5.probability < p5 * 1.5);
}

TEST_CASE("decoupled levels never mix", "[reference]")
{
    const ModelSpec m = diagonal({3.0, 0.0, -3.0});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (i != j)
                CHECK(numeric_transition_probability(m, 1.0, i, j, SolverConfig{}).probability <= 1e-10);
}

TEST_CASE("initial phase does not matter", "[reference]")
{
    const ModelSpec m = builtin("lzsm3", {});
    const EigenFrame f = real_axis_frame(m, -14);
    State a = {f.right(0, 2), f.right(1, 2), f.right(2, 2)};
    State b = a;
    for (auto& c : b)
        c *= std::polar(1.0, 0.83);
    const auto ta = integrate(m, 1.0, SolverConfig{}, a, {-14.0, 10.0});
    const auto tb = integrate(m, 1.0, SolverConfig{}, b, {-14.0, 10.0});
    const auto pa = project_adiabatic(m, 10.0, ta.psi.back());
    const auto pb = project_adiabatic(m, 10.0, tb.psi.back());
    for (int j = 0; j < 3; ++j)
        CHECK(std::abs(std::norm(pa[j]) - std::norm(pb[j])) <= 1e-10);
}

TEST_CASE("time reversal recovers the initial state", "[reference]")
{
    const ModelSpec m = builtin("nlzsm", {{"n", 2}});
    const double t0 = -4, t1 = 3;
    SolverConfig cfg;
    const State psi0 = {cplx(0.6, 0.0), cplx(0.0, 0.8)};
    const auto fwd = integrate(m, 1.5, cfg, psi0, {t0, t1});
    ModelSpec rev = m;
    for (auto& p : rev.entries)
        p = reflect_conj(p, t0 + t1);
    State chi(2);
    for (int k = 0; k < 2; ++k)
        chi[k] = std::conj(fwd.psi.back()[k]);
    const auto back = integrate(rev, 1.5, cfg, chi, {t0, t1});
    for (int k = 0; k < 2; ++k)
        CHECK(std::abs(std::conj(back.psi.back()[k]) - psi0[k]) <= 100 * cfg.rel_tol);
}

TEST_CASE("tightening the tolerance stays within the error estimate", "[reference]")
{
    const ModelSpec m = builtin("nlzsm", {{"n", 2}});
    BranchAtlas a(m);
    SolverConfig cfg;
    cfg.rel_tol = 1e-8;
    cfg.abs_tol = 1e-10;
    const auto r1 = numeric_transition_probability(m, 1.0, 1, 0, cfg, a.locations());
    cfg.rel_tol /= 2;
    cfg.abs_tol /= 2;
    const auto r2 = numeric_transition_probability(m, 1.0, 1, 0, cfg, a.locations());
    CHECK(std::abs(r1.probability - r2.probability) <= *r1.error_estimate);
}

TEST_CASE("trajectory csv", "[reference]")
{
    const ModelSpec m = lz();
    const auto tr = integrate(m, 1.0, SolverConfig{}, {1.0, 0.0}, {-1.0, 0.0, 1.0});
    const std::string csv = trajectory_to_csv(m, tr);
    CHECK(csv.rfind("t,re_psi1,im_psi1,re_psi2,im_psi2,pop1,pop2\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}
