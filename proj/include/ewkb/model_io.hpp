#pragma once

#include "ewkb/model.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace ewkb {

namespace detail {

inline double json_number(const nlohmann::json& j, const std::string& what)
{
    if (!j.is_number())
        throw ModelError(what + " must be a number");
    return j.get<double>();
}

inline Polynomial json_polynomial(const nlohmann::json& j, const std::string& what)
{
    if (!j.is_array())
        throw ModelError(what + " must be a list of coefficients");
    std::vector<cplx> c;
    for (const auto& x : j) {
        if (x.is_number())
            c.emplace_back(x.get<double>(), 0.0);
        else if (x.is_array() && x.size() == 2 && x[0].is_number() && x[1].is_number())
            c.emplace_back(x[0].get<double>(), x[1].get<double>());
        else
            throw ModelError(what + ": coefficients are [re, im] pairs or real numbers");
    }
    return Polynomial(c);
}

// Default loss slots: the leading term of every non-constant diagonal entry.
inline std::vector<PerturbSlot> leading_diagonal_slots(const ModelSpec& m)
{
    std::vector<PerturbSlot> s;
    for (int j = 0; j < m.dimension; ++j) {
        const int d = m.entry(j, j).degree();
        if (d > 0)
            s.push_back({j, j, d});
    }
    return s;
}

} // namespace detail

inline ModelSpec model_from_json(const nlohmann::json& j)
{
    if (!j.is_object())
        throw ModelError("model document must be an object");
    static const char* known[] = {"builtin", "label", "dimension", "eta", "epsilon", "entries", "perturb"};
    for (const auto& [k, v] : j.items()) {
        bool ok = false;
        for (auto n : known)
            ok = ok || k == n;
        if (!ok)
            throw ModelError("unknown model field '" + k + "'");
    }
    if (j.contains("builtin")) {
        if (j.contains("entries") || j.contains("dimension") || j.contains("perturb"))
            throw ModelError("a built-in model cannot also give entries, dimension or perturb");
        const auto& b = j["builtin"];
        if (!b.is_object() || !b.contains("name") || !b["name"].is_string())
            throw ModelError("builtin needs a string 'name'");
        std::map<std::string, double> params;
        if (b.contains("params")) {
            if (!b["params"].is_object())
                throw ModelError("builtin params must be an object");
            for (const auto& [k, v] : b["params"].items())
                params[k] = detail::json_number(v, "builtin parameter '" + k + "'");
        }
        for (const char* k : {"eta", "epsilon"})
            if (j.contains(k))
                params[k] = detail::json_number(j[k], k);
        ModelSpec m = builtin(b["name"].get<std::string>(), params);
        if (j.contains("label")) {
            if (!j["label"].is_string())
                throw ModelError("label must be a string");
            m.label = j["label"].get<std::string>();
        }
        return m;
    }
    if (!j.contains("dimension") || !j.contains("entries"))
        throw ModelError("model needs 'dimension' and 'entries' (or 'builtin')");
    ModelSpec m;
    const double d = detail::json_number(j["dimension"], "dimension");
    if (d != std::floor(d) || d < 1 || d > 64)
        throw ModelError("dimension must be a positive integer");
    m.dimension = static_cast<int>(d);
    if (!j["entries"].is_array() || j["entries"].size() != std::size_t(m.dimension * m.dimension))
        throw ModelError("entries must list dimension^2 polynomials in row-major order");
    for (std::size_t k = 0; k < j["entries"].size(); ++k)
        m.entries.push_back(detail::json_polynomial(
            j["entries"][k], "entry (" + std::to_string(k / m.dimension + 1) + "," +
                                 std::to_string(k % m.dimension + 1) + ")"));
    m.eta = j.contains("eta") ? detail::json_number(j["eta"], "eta") : 1.0;
    m.epsilon = j.contains("epsilon") ? detail::json_number(j["epsilon"], "epsilon") : 0.0;
    if (j.contains("label")) {
        if (!j["label"].is_string())
            throw ModelError("label must be a string");
        m.label = j["label"].get<std::string>();
    } else {
        m.label = "model";
    }
    if (j.contains("perturb")) {
        if (!j["perturb"].is_array())
            throw ModelError("perturb must be a list of [row, col, power]");
        for (const auto& s : j["perturb"]) {
            if (!s.is_array() || s.size() != 3)
                throw ModelError("perturb slots are [row, col, power]");
            const double r = detail::json_number(s[0], "perturb row"), c = detail::json_number(s[1], "perturb col"),
                         p = detail::json_number(s[2], "perturb power");
            if (r != std::floor(r) || c != std::floor(c) || p != std::floor(p))
                throw ModelError("perturb slot indices must be integers");
            m.perturbed.push_back({static_cast<int>(r) - 1, static_cast<int>(c) - 1, static_cast<int>(p)});
        }
    } else {
        m.perturbed = detail::leading_diagonal_slots(m);
    }
    validate(m);
    return m;
}

inline nlohmann::ordered_json model_to_json(const ModelSpec& m)
{
    nlohmann::ordered_json j;
    j["label"] = m.label;
    if (!m.builtin_name.empty()) {
        nlohmann::ordered_json p = nlohmann::ordered_json::object();
        for (const auto& [k, v] : m.builtin_params)
            if (k != "eta" && k != "epsilon")
                p[k] = v;
        j["builtin"] = {{"name", m.builtin_name}, {"params", p}};
        j["eta"] = m.eta;
        j["epsilon"] = m.epsilon;
        return j;
    }
    j["dimension"] = m.dimension;
    j["eta"] = m.eta;
    j["epsilon"] = m.epsilon;
    auto& e = j["entries"] = nlohmann::ordered_json::array();
    for (const auto& p : m.entries) {
        auto c = nlohmann::ordered_json::array();
        for (auto z : p.coeffs)
            c.push_back({z.real(), z.imag()});
        e.push_back(c);
    }
    auto& s = j["perturb"] = nlohmann::ordered_json::array();
    for (const auto& slot : m.perturbed)
        s.push_back({slot.row + 1, slot.col + 1, slot.power});
    return j;
}

inline ModelSpec parse_model(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelError(std::string("model file is not valid JSON: ") + e.what());
    }
    return model_from_json(j);
}

inline ModelSpec load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ModelError("cannot read model file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

// Copy of a model document with one parameter replaced: eta, epsilon, or a
// built-in parameter.
inline nlohmann::json with_parameter(nlohmann::json doc, const std::string& name, double value)
{
    if (name == "eta" || name == "epsilon") {
        doc[name] = value;
        return doc;
    }
    if (!doc.contains("builtin"))
        throw ModelError("parameter '" + name + "' can only be varied on built-in models");
    doc["builtin"]["params"][name] = value;
    return doc;
}

} // namespace ewkb
