#include <catch_amalgamated.hpp>

#include "ewkb/graph_export.hpp"
#include "ewkb/model_io.hpp"
#include "ewkb/report.hpp"

#include <cmath>

#ifndef EWKB_SOURCE_DIR
#define EWKB_SOURCE_DIR "."
#endif

using namespace ewkb;
using Catch::Approx;

namespace {

bool same_h(const ModelSpec& a, const ModelSpec& b)
{
    for (double t : {-1.7, 0.0, 0.4, 2.2})
        if ((evaluate_h(a, t) - evaluate_h(b, t)).norm() > 1e-15)
            return false;
    return a.dimension == b.dimension && a.eta == b.eta && a.epsilon == b.epsilon;
}

} // namespace

TEST_CASE("shipped model files", "[io]")
{
    const ModelSpec n3 = load_model(EWKB_SOURCE_DIR "/models/nlzsm_n3.json");
    CHECK(same_h(n3, builtin("nlzsm", {{"n", 3}, {"epsilon", 0.05}})));
    CHECK(n3.perturbed.size() == 2);
    CHECK(n3.perturbed[0].power == 3);

    const ModelSpec l3 = load_model(EWKB_SOURCE_DIR "/models/lzsm3.json");
    CHECK(same_h(l3, builtin("lzsm3", {})));
    CHECK(l3.builtin_name == "lzsm3");
}

TEST_CASE("model round trip", "[io]")
{
    const ModelSpec a = parse_model(R"({"dimension": 2, "eta": 2.5, "label": "x",
        "entries": [[[0,0],[1.5,0]], [[0.3,0.1]], [[0.3,-0.1]], [[0,0],[-1.5,0]]]})");
    CHECK(a.perturbed.size() == 2); // leading diagonal terms by default
    const ModelSpec b = model_from_json(nlohmann::json::parse(model_to_json(a).dump()));
    CHECK(same_h(a, b));
    CHECK(b.label == "x");

    const ModelSpec c = builtin("nlzsm", {{"n", 2}, {"delta", 0.7}, {"eta", 3}});
    const ModelSpec d = model_from_json(nlohmann::json::parse(model_to_json(c).dump()));
    CHECK(same_h(c, d));
    CHECK(d.builtin_params.at("delta") == 0.7);
}

TEST_CASE("malformed model documents", "[io]")
{
    const char* bad[] = {
        "not json",
        "[]",
        R"({"dimension": 2})",
        R"({"dimension": 2, "entries": [[1],[0],[0]]})",
        R"({"dimension": 2.5, "entries": []})",
        R"({"dimension": 2, "entries": [[1],[0],[0],["x"]]})",
        R"({"dimension": 2, "entries": [[[0,0],[1,0]],[[1,0]],[[2,0]],[[0,0],[-1,0]]]})",
        R"({"dimension": 2, "eta": -1, "entries": [[[0,0],[1,0]],[[1,0]],[[1,0]],[[0,0],[-1,0]]]})",
        R"({"dimension": 2, "colour": 1, "entries": [[[0,0],[1,0]],[[1,0]],[[1,0]],[[0,0],[-1,0]]]})",
        R"({"builtin": {"name": "nosuch"}})",
        R"({"builtin": {"name": "nlzsm", "params": {"n": 0}}})",
        R"({"builtin": {"name": "nlzsm", "params": {"speed": 1}}})",
        R"({"builtin": {"name": "lzsm3"}, "entries": []})",
    };
    for (const char* s : bad) {
        INFO(s);
        CHECK_THROWS_AS(parse_model(s), ModelError);
    }
    CHECK_THROWS_AS(load_model("/nonexistent/model.json"), ModelError);
}

TEST_CASE("parameter substitution", "[io]")
{
    const auto doc = nlohmann::json::parse(R"({"builtin": {"name": "lzsm3", "params": {}}})");
    const ModelSpec m = model_from_json(with_parameter(doc, "delta23", 0.8));
    CHECK(m.entry(1, 2).coeff(0) == cplx(0.8));
    CHECK(model_from_json(with_parameter(doc, "eta", 3.0)).eta == 3.0);
    const auto plain = nlohmann::json::parse(R"({"dimension": 2,
        "entries": [[[0,0],[1,0]],[[1,0]],[[1,0]],[[0,0],[-1,0]]]})");
    CHECK(model_from_json(with_parameter(plain, "eta", 2.0)).eta == 2.0);
    CHECK_THROWS_AS(with_parameter(plain, "delta", 2.0), ModelError);
}

TEST_CASE("report round trip", "[io]")
{
    TransitionReport r;
    r.method = "ewkb";
    r.from_level = 3;
    r.to_level = 2;
    r.eta = 1.0;
    r.set_probability(1.0000000001);
    r.amplitude = cplx(0.6, -0.8);
    r.error_estimate = 1e-7;
    r.steps.push_back({-1.25, cplx(-1, 0.5), 1, 2, 3, 3, cplx(-1, 0), cplx(0.2, 0.1)});
    r.diagnostics["t_ref"] = -5;
    r.warnings.push_back("w");
    const auto j = to_json(r);
    CHECK(j["probability"] == 1.0);
    CHECK(j["diagnostics"]["probability_raw"].get<double>() > 1.0);
    const TransitionReport s = report_from_json(nlohmann::ordered_json::parse(j.dump()));
    CHECK(s.method == "ewkb");
    CHECK(s.from_level == 3);
    CHECK(s.to_level == 2);
    CHECK(s.probability == 1.0);
    CHECK(s.probability_raw == r.probability_raw);
    CHECK(*s.amplitude == *r.amplitude);
    CHECK(*s.error_estimate == 1e-7);
    REQUIRE(s.steps.size() == 1);
    CHECK(s.steps[0].tp == cplx(-1, 0.5));
    CHECK(s.steps[0].orientation == 1);
    CHECK(s.steps[0].prefactor == cplx(0.2, 0.1));
    CHECK(s.diagnostics.at("t_ref") == -5);
    CHECK(s.warnings == r.warnings);
}
