#include "ewkb/graph_export.hpp"
#include "ewkb/stokes.hpp"

#include <catch_amalgamated.hpp>

using namespace ewkb;

namespace {
const cplx I(0, 1);

ModelSpec nlzsm(int n, double eps = 0.0)
{
    return builtin("nlzsm", {{"n", n}, {"epsilon", eps}});
}

GraphOptions fixed()
{
    GraphOptions o;
    o.auto_epsilon = false;
    return o;
}

int principal_crossings(const StokesGraph& g) { return static_cast<int>(g.ordered_crossings().size()); }

// Independent action along a two-level sweep polyline: 2 sqrt(1 + t^2), kept
// continuous from sample to sample, integrated with Simpson's rule.
std::vector<cplx> lz_action(const std::vector<cplx>& pts, cplx first_gap)
{
    auto raw = [](cplx t) { return 2.0 * std::sqrt(1.0 + t * t); };
    std::vector<cplx> F(pts.size());
    cplx prev = first_gap;
    F[0] = 0;
    for (std::size_t k = 1; k < pts.size(); ++k) {
        auto cont = [&](cplx t) {
            cplx g = raw(t);
            return std::abs(g - prev) < std::abs(g + prev) ? g : -g;
        };
        const cplx a = pts[k - 1], b = pts[k];
        const cplx gm = cont(0.5 * (a + b));
        prev = gm;
        const cplx gb = cont(b);
        const cplx ga = k == 1 ? 0.0 : cont(a);
        F[k] = F[k - 1] + (b - a) / 6.0 * (ga + 4.0 * gm + gb);
        prev = gb;
    }
    return F;
}
} // namespace

TEST_CASE("initial directions")
{
    auto d = directions_from_c2(1.0);
    CHECK(std::abs(std::arg(d[0]) - M_PI / 3) < 1e-14);
    CHECK(std::abs(std::abs(std::arg(d[1])) - M_PI) < 1e-14);
    CHECK(std::abs(std::arg(d[2]) + M_PI / 3) < 1e-14);

    // two-level sweep at +i: (E1 - E2)^2 = 4 (1 + t^2), c^2 = 8i
    auto m = nlzsm(1);
    auto e = initial_directions(m, I);
    CHECK(std::abs(e[0] - std::polar(1.0, M_PI / 6)) < 1e-8);
    CHECK(std::abs(e[1] - std::polar(1.0, 5 * M_PI / 6)) < 1e-8);
    CHECK(std::abs(e[2] + I) < 1e-8);
}

TEST_CASE("two-level sweep without loss: the lines of +i and -i connect")
{
    auto g = build_graph(nlzsm(1), fixed());
    REQUIRE(g.lines.size() == 6);
    CHECK(g.degenerate());
    bool found = false;
    for (const auto& l : g.lines)
        if (g.turning_points[l.tp].location.imag() > 0 && l.termination == Termination::TurningPoint) {
            found = true;
            CHECK(std::abs(g.turning_points[l.hit_tp].location + I) < 1e-10);
            CHECK(std::abs(l.direction + I) < 1e-8); // the downward branch
        }
    CHECK(found);
}

TEST_CASE("graph counts with loss")
{
    auto g1 = build_graph(nlzsm(1, 0.05), fixed());
    CHECK(g1.lines.size() == 6);
    CHECK(!g1.degenerate());
    CHECK(principal_crossings(g1) == 2);

    auto g3 = build_graph(nlzsm(3, 0.05), fixed());
    CHECK(g3.lines.size() == 18);
    CHECK(!g3.degenerate());
    CHECK(principal_crossings(g3) == 6);

    auto g3d = build_graph(nlzsm(3), fixed());
    CHECK(g3d.degenerate());

    auto gl = build_graph(builtin("lzsm3", {}));
    CHECK(gl.escalated);
    CHECK(gl.epsilon_used == 0.01);
    CHECK(!gl.degenerate());
    CHECK(principal_crossings(gl) == 6);
    CHECK(!gl.virtual_points.empty());
}

TEST_CASE("Stokes condition holds along traced lines")
{
    auto g = build_graph(nlzsm(1, 0.0), fixed());
    for (const auto& l : g.lines) {
        // own bookkeeping
        for (std::size_t k = 2; k < l.action.size(); ++k)
            CHECK(std::abs(l.action[k].real()) <= 1e-3 * std::abs(l.action[k]) + 1e-12);
        // independent action along the same polyline
        std::vector<cplx> pts(l.points.begin(), l.points.end() - (l.termination == Termination::TurningPoint));
        const cplx t1 = pts[1];
        auto F = lz_action(pts, 2.0 * std::sqrt(1.0 + t1 * t1));
        double worst = 0;
        for (std::size_t k = 4; k < F.size(); ++k)
            worst = std::max(worst, std::abs(F[k].real()) / std::abs(F[k]));
        CHECK(worst <= 1e-3);
    }
}

TEST_CASE("dominance matches the sign of the action")
{
    auto g = build_graph(nlzsm(1, 0.05), fixed());
    for (const auto& l : g.lines) {
        for (std::size_t k = 2; k < l.action.size(); ++k)
            CHECK((l.action[k].imag() > 0) == (l.dominant == l.level_i));
        if (l.crossings.empty())
            continue;
        // independent check: integrate back from the crossing, where the
        // real-axis gap E1 - E2 is positive
        const double x = l.crossings[0].x;
        std::size_t kx = 0;
        while (kx + 1 < l.points.size() && (l.points[kx + 1].imag() > 0) == (l.points[1].imag() > 0))
            ++kx;
        std::vector<cplx> back(l.points.rbegin() + (l.points.size() - 1 - kx), l.points.rend());
        back.insert(back.begin(), x);
        // with loss v -> 1 + 0.05i the gap is 2 sqrt(1 + (m t)^2); integrate along `back`
        const cplx m(1, 0.05);
        cplx F = 0, prev = 2.0 * std::sqrt(1.0 + std::pow(m * x, 2));
        for (std::size_t k = 1; k < back.size(); ++k) {
            auto cont = [&](cplx t) {
                cplx gv = 2.0 * std::sqrt(1.0 + std::pow(m * t, 2));
                return std::abs(gv - prev) < std::abs(gv + prev) ? gv : -gv;
            };
            const cplx a = back[k - 1], b = back[k];
            const cplx ga = cont(a), gm = cont(0.5 * (a + b)), gb = cont(b);
            F += (b - a) / 6.0 * (ga + 4.0 * gm + gb);
            prev = gb;
        }
        // F is the integral from the crossing to the turning point; the action
        // at the crossing is -F
        CHECK(((-F).imag() > 0) == (l.dominant == l.level_i));
    }
}

TEST_CASE("conjugate symmetry of lines")
{
    auto g = build_graph(nlzsm(3), fixed());
    for (const auto& l : g.lines) {
        const cplx partner_tp = std::conj(g.turning_points[l.tp].location);
        const StokesLine* best = nullptr;
        for (const auto& o : g.lines)
            if (std::abs(g.turning_points[o.tp].location - partner_tp) < 1e-10 &&
                std::abs(o.direction - std::conj(l.direction)) < 1e-6)
                best = &o;
        REQUIRE(best != nullptr);
        const std::size_t n = std::min(l.points.size(), best->points.size());
        double worst = 0;
        for (std::size_t k = 0; k + 1 < n; ++k)
            worst = std::max(worst, std::abs(l.points[k] - std::conj(best->points[k])));
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("three lines per turning point, 2 pi / 3 apart near it")
{
    for (auto m : {nlzsm(1, 0.05), nlzsm(3, 0.05), builtin("lzsm3", {{"epsilon", 0.01}})}) {
        auto g = build_graph(m, fixed());
        for (std::size_t k = 0; k < g.turning_points.size(); ++k) {
            std::vector<double> ang;
            for (const auto& l : g.lines)
                if (l.tp == static_cast<int>(k)) {
                    REQUIRE(l.points.size() > 11);
                    ang.push_back(std::arg(l.points[10] - l.points[0]));
                }
            REQUIRE(ang.size() == 3);
            std::sort(ang.begin(), ang.end());
            const double d1 = ang[1] - ang[0], d2 = ang[2] - ang[1], d3 = 2 * M_PI - (ang[2] - ang[0]);
            for (double d : {d1, d2, d3})
                CHECK(std::abs(d - 2 * M_PI / 3) < 5e-2);
        }
    }
}

TEST_CASE("loss strength does not change the crossing structure")
{
    for (auto name : {"nlzsm", "lzsm3"}) {
        std::map<std::string, double> p;
        if (std::string(name) == "nlzsm")
            p["n"] = 3;
        std::vector<std::vector<int>> seqs;
        for (double eps : {0.01, 0.05}) {
            p["epsilon"] = eps;
            auto g = build_graph(builtin(name, p), fixed());
            REQUIRE(!g.degenerate());
            std::vector<int> seq;
            for (const auto& c : g.ordered_crossings()) {
                const auto& l = g.lines[c.line];
                seq.push_back(l.dominant * 10 + l.subdominant);
            }
            seqs.push_back(seq);
        }
        CHECK(seqs[0] == seqs[1]);
    }
}

TEST_CASE("CSV export is deterministic")
{
    auto a = graph_to_csv(build_graph(nlzsm(3, 0.05), fixed()));
    auto b = graph_to_csv(build_graph(nlzsm(3, 0.05), fixed()));
    CHECK(a == b);
    CHECK(a.rfind("line,tp_re,tp_im,level_i,level_j,dominant,re,im\n", 0) == 0);
    auto svg = graph_to_svg(build_graph(nlzsm(1, 0.05), fixed()));
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("polyline") != std::string::npos);
}

TEST_CASE("principal-sheet mode stops lines at cuts")
{
    GraphOptions o = fixed();
    o.trace.principal_sheet_only = true;
    auto g = build_graph(builtin("lzsm3", {{"epsilon", 0.01}}), o);
    int stopped = 0;
    for (const auto& l : g.lines)
        stopped += l.termination == Termination::CutBoundary;
    CHECK(stopped > 0);
}
