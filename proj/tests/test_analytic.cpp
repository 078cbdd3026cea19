#include "ewkb/quadrature.hpp"
#include "ewkb/residue.hpp"
#include "ewkb/roots.hpp"

#include <catch_amalgamated.hpp>

using namespace ewkb;
using Catch::Approx;

namespace {
const cplx I(0, 1);
}

TEST_CASE("integrate_path: elementary integrals")
{
    auto r1 = integrate_path([](cplx t) { return t; }, PathPolyline::segment(0, 1), 1e-12);
    CHECK(std::abs(r1.value - 0.5) < 1e-14);

    // 1/z around the unit circle; 64 chords is still a closed contour around 0
    auto circ = PathPolyline::circle(0, 1, 64);
    auto r2 = integrate_path([](cplx t) { return 1.0 / t; }, circ, 1e-12);
    CHECK(std::abs(r2.value - 2.0 * M_PI * I) < 1e-10);

    // 2 sqrt(1+s^2) from 0 to i equals i pi/2
    auto f = [](cplx s) { return 2.0 * std::sqrt(1.0 + s * s); };
    auto r3 = integrate_from_branch_point([&](cplx s) { return f(s); }, I, 0.0);
    CHECK(std::abs(-r3.value - I * M_PI / 2.0) < 1e-12);
    auto r4 = integrate_path(f, PathPolyline::segment(0, I * 0.999999), 1e-12);
    CHECK(std::abs(r4.value - I * M_PI / 2.0) < 1e-5);
}

TEST_CASE("integrate_path: additivity and exact orientation antisymmetry")
{
    auto f = [](cplx t) { return std::exp(t) * std::sin(3.0 * t) + 1.0 / (t - 5.0); };
    PathPolyline p({0.0, 1.0 + I, 2.0 - 0.5 * I, 3.0});
    auto whole = integrate_path(f, p, 1e-12).value;
    auto a = integrate_path(f, PathPolyline({0.0, 1.0 + I}), 1e-12).value;
    auto b = integrate_path(f, PathPolyline({1.0 + I, 2.0 - 0.5 * I, 3.0}), 1e-12).value;
    CHECK(std::abs(whole - (a + b)) < 1e-10 * std::abs(whole));

    auto rev = integrate_path(f, p.reversed(), 1e-12).value;
    CHECK(rev == -whole);

    auto circ = PathPolyline::circle(0.3, 1.7, 9, 0.1);
    auto c1 = integrate_path(f, circ, 1e-12).value;
    auto c2 = integrate_path(f, circ.reversed(), 1e-12).value;
    CHECK(c2 == -c1);
}

TEST_CASE("integrate_path: failures are reported")
{
    auto bad = [](cplx t) { return 1.0 / (t - 0.5); };
    CHECK_THROWS_AS(integrate_path(bad, PathPolyline::segment(0, 1), 1e-12), NumericalError);
    QuadratureOptions o;
    o.max_intervals = 8;
    auto wiggly = [](cplx t) { return std::sin(400.0 * t); };
    CHECK_THROWS_AS(integrate_path(wiggly, PathPolyline::segment(0, 1), o), NumericalError);
}

TEST_CASE("find_root: examples")
{
    auto r1 = find_root([](cplx t) { return t * t + 1.0; }, cplx(0.5, 0.8));
    CHECK(std::abs(r1.root - I) < 1e-12);

    // discriminant of the n = 3 nonlinear sweep model, 4 (t^6 + 1)
    auto r2 = find_root([](cplx t) { return 4.0 * (std::pow(t, 6) + 1.0); }, cplx(0.9, 0.4));
    CHECK(std::abs(r2.root - std::polar(1.0, M_PI / 6)) < 1e-12);

    auto r3 = find_root([](cplx t) { return std::sin(t); }, 3.0);
    CHECK(std::abs(r3.root - M_PI) < 1e-12);
}

TEST_CASE("find_root: failures")
{
    CHECK_THROWS_AS(find_root([](cplx t) { return (t - 1.0) * (t - 1.0); }, 1.0), NumericalError);
    CHECK_THROWS_AS(find_root([](cplx t) { return std::exp(t); }, 0.0), NumericalError);
}

TEST_CASE("residue_at: examples")
{
    CHECK(std::abs(residue_at([](cplx t) { return 1.0 / t; }, 0, 1).value - 1.0) < 1e-12);

    // two-level sweep coupling, residue 1/4 at t = i
    auto g = [](cplx t) { return 0.5 * I / (1.0 + t * t); };
    CHECK(std::abs(residue_at(g, I, 0.3).value - 0.25) < 1e-10);

    auto e = [](cplx t) { return std::exp(t) / (t * t); };
    CHECK(std::abs(residue_at(e, 0, 0.5).value - 1.0) < 1e-12);

    auto lim = simple_pole_limit(g, I, -I, 1e-2);
    CHECK(std::abs(lim - 0.25) < 1e-8);
}

TEST_CASE("residue_at: interfering singularity is detected")
{
    auto f = [](cplx t) { return 1.0 / t + 1.0 / (t - 0.7); };
    CHECK_THROWS_AS(residue_at(f, 0, 1.0), NumericalError);
    auto s = [](cplx t) { return std::sqrt(t - 0.3); };
    CHECK_THROWS_AS(residue_at(s, 0, 1.0), NumericalError);
}

TEST_CASE("count_zeros: examples")
{
    auto q = [](cplx t) { return t * t + 1.0; };
    CHECK(count_zeros(q, Rect{-2, 2, 0.5, 2}) == 1);
    CHECK(count_zeros(q, Rect{-2, 2, -2, 2}) == 2);
    auto d = [](cplx t) { return 4.0 * (std::pow(t, 6) + 1.0); };
    CHECK(count_zeros(d, Rect{-2, 2, 0.1, 2}) == 3);
    // zero on the boundary: the rectangle is nudged
    double nudged = 0;
    CHECK(count_zeros(q, Rect{-2, 2, 1, 2}, &nudged) == 1);
    CHECK(nudged > 0);
}

TEST_CASE("find_zeros: locates every zero")
{
    auto d = [](cplx t) { return std::pow(t, 6) + 1.0; };
    auto zs = find_zeros(d, Rect{-3, 3, -3, 3}, 1e-6);
    REQUIRE(zs.size() == 6);
    for (auto& z : zs)
        CHECK(std::abs(std::pow(z.z, 6) + 1.0) < 1e-12);
    auto dbl = [](cplx t) { return (t - 0.2) * (t - 0.2) * (t + 1.0); };
    auto zd = find_zeros(dbl, Rect{-2, 2, -2, 2}, 1e-6);
    REQUIRE(zd.size() == 2);
    CHECK(zd[1].order == 2);
    CHECK(std::abs(zd[1].z - 0.2) < 1e-5);
}
