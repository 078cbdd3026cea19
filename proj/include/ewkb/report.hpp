#pragma once

#include "ewkb/errors.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ewkb {

// One row of the per-crossing diagnostics table.
struct StepRecord {
    double crossing = 0;
    cplx tp;
    int orientation = 1; // +1 counterclockwise
    int level_i = 1, level_j = 2, dominant = 1; // 1-based
    cplx coefficient;
    cplx prefactor;
};

// Result of any transition-probability method. Levels are 1-based.
struct TransitionReport {
    std::string method;
    int from_level = 1;
    int to_level = 2;
    double eta = 1;
    double probability = 0;     // clipped to [0, 1]
    double probability_raw = 0; // before clipping
    std::optional<cplx> amplitude;
    std::optional<double> error_estimate;
    std::vector<StepRecord> steps;
    std::map<std::string, double> diagnostics;
    std::vector<std::string> warnings;

    void set_probability(double p)
    {
        probability_raw = p;
        probability = std::clamp(p, 0.0, 1.0);
    }
};

inline nlohmann::ordered_json to_json(const TransitionReport& r)
{
    nlohmann::ordered_json j;
    j["method"] = r.method;
    j["levels"] = {{"from", r.from_level}, {"to", r.to_level}};
    j["eta"] = r.eta;
    j["probability"] = r.probability;
    if (r.amplitude)
        j["amplitude"] = {{"re", r.amplitude->real()}, {"im", r.amplitude->imag()}};
    else
        j["amplitude"] = nullptr;
    nlohmann::ordered_json d;
    d["probability_raw"] = r.probability_raw;
    if (r.error_estimate)
        d["error_estimate"] = *r.error_estimate;
    for (const auto& [k, v] : r.diagnostics)
        d[k] = v;
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const auto& s : r.steps)
        steps.push_back({{"crossing", s.crossing},
                         {"tp", {s.tp.real(), s.tp.imag()}},
                         {"orientation", s.orientation > 0 ? "ccw" : "cw"},
                         {"pair", {s.level_i, s.level_j}},
                         {"dominant", s.dominant},
                         {"coefficient_abs", std::abs(s.coefficient)},
                         {"coefficient", {s.coefficient.real(), s.coefficient.imag()}},
                         {"prefactor_abs", std::abs(s.prefactor)},
                         {"prefactor", {s.prefactor.real(), s.prefactor.imag()}}});
    d["steps"] = steps;
    d["warnings"] = r.warnings;
    j["diagnostics"] = d;
    return j;
}

inline TransitionReport report_from_json(const nlohmann::ordered_json& j)
{
    TransitionReport r;
    r.method = j.at("method").get<std::string>();
    r.from_level = j.at("levels").at("from").get<int>();
    r.to_level = j.at("levels").at("to").get<int>();
    r.eta = j.at("eta").get<double>();
    r.probability = j.at("probability").get<double>();
    if (!j.at("amplitude").is_null())
        r.amplitude = cplx(j["amplitude"]["re"].get<double>(), j["amplitude"]["im"].get<double>());
    const auto& d = j.at("diagnostics");
    r.probability_raw = d.at("probability_raw").get<double>();
    if (d.contains("error_estimate"))
        r.error_estimate = d["error_estimate"].get<double>();
    for (auto it = d.begin(); it != d.end(); ++it)
        if (it.value().is_number() && it.key() != "probability_raw" && it.key() != "error_estimate")
            r.diagnostics[it.key()] = it.value().get<double>();
    for (const auto& s : d.at("steps")) {
        StepRecord st;
        st.crossing = s.at("crossing").get<double>();
        st.tp = cplx(s.at("tp")[0].get<double>(), s.at("tp")[1].get<double>());
        st.orientation = s.at("orientation").get<std::string>() == "ccw" ? 1 : -1;
        st.level_i = s.at("pair")[0].get<int>();
        st.level_j = s.at("pair")[1].get<int>();
        st.dominant = s.at("dominant").get<int>();
        st.coefficient = cplx(s.at("coefficient")[0].get<double>(), s.at("coefficient")[1].get<double>());
        st.prefactor = cplx(s.at("prefactor")[0].get<double>(), s.at("prefactor")[1].get<double>());
        r.steps.push_back(st);
    }
    r.warnings = d.at("warnings").get<std::vector<std::string>>();
    return r;
}

} // namespace ewkb
