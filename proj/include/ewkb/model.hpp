#pragma once

#include "ewkb/errors.hpp"
#include "ewkb/polynomial.hpp"
#include "ewkb/roots.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace ewkb {

using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// One coefficient of one matrix entry that the infinitesimal-loss rule
// multiplies by (1 + i epsilon).
struct PerturbSlot {
    int row = 0, col = 0, power = 0;
};

// H(t) as an N x N matrix of polynomials in t (time rescaled so that the
// Schroedinger equation reads i dpsi/dt = eta H(t) psi).
struct ModelSpec {
    int dimension = 0;
    std::vector<Polynomial> entries; // row-major
    double eta = 1.0;
    double epsilon = 0.0;
    std::string label;
    std::vector<PerturbSlot> perturbed;

    // Set for built-in families; lets the parameters be echoed and re-derived.
    std::string builtin_name;
    std::map<std::string, double> builtin_params;

    const Polynomial& entry(int j, int k) const { return entries[j * dimension + k]; }

    ModelSpec with_epsilon(double eps) const
    {
        ModelSpec m = *this;
        m.epsilon = eps;
        if (!m.builtin_name.empty())
            m.builtin_params["epsilon"] = eps;
        return m;
    }
    ModelSpec with_eta(double eta_new) const
    {
        ModelSpec m = *this;
        m.eta = eta_new;
        if (!m.builtin_name.empty())
            m.builtin_params["eta"] = eta_new;
        return m;
    }

    int max_degree() const
    {
        int d = 0;
        for (const auto& p : entries)
            d = std::max(d, p.degree());
        return d;
    }
};

namespace detail {

inline cplx perturbed_entry(const ModelSpec& m, int j, int k, cplx t, bool derivative)
{
    const Polynomial& p = m.entry(j, k);
    cplx v = derivative ? p.derivative()(t) : p(t);
    if (m.epsilon == 0.0)
        return v;
    for (const auto& s : m.perturbed) {
        if (s.row != j || s.col != k)
            continue;
        const cplx c = p.coeff(s.power);
        if (derivative)
            v += cplx(0, m.epsilon) * c * (s.power > 0 ? double(s.power) * std::pow(t, s.power - 1) : 0.0);
        else
            v += cplx(0, m.epsilon) * c * std::pow(t, s.power);
    }
    return v;
}

} // namespace detail

// H(t) with the loss rule applied; eta is not included.
inline Mat evaluate_h(const ModelSpec& m, cplx t)
{
    Mat h(m.dimension, m.dimension);
    for (int j = 0; j < m.dimension; ++j)
        for (int k = 0; k < m.dimension; ++k)
            h(j, k) = detail::perturbed_entry(m, j, k, t, false);
    return h;
}

inline Mat evaluate_dh(const ModelSpec& m, cplx t)
{
    Mat h(m.dimension, m.dimension);
    for (int j = 0; j < m.dimension; ++j)
        for (int k = 0; k < m.dimension; ++k)
            h(j, k) = detail::perturbed_entry(m, j, k, t, true);
    return h;
}

// Coefficients c_1..c_N of det(lambda - A) = lambda^N + c_1 lambda^{N-1} + ...
inline std::vector<cplx> characteristic_coefficients(const Mat& a)
{
    const int n = static_cast<int>(a.rows());
    std::vector<cplx> c(n + 1);
    c[0] = 1.0;
    Mat m = Mat::Zero(n, n);
    const Mat id = Mat::Identity(n, n);
    for (int k = 1; k <= n; ++k) {
        m = a * m + c[k - 1] * id;
        c[k] = -(a * m).trace() / double(k);
    }
    return c;
}

// prod_{i<j} (lambda_i - lambda_j)^2 of a matrix, from its characteristic
// polynomial (no eigen-decomposition, so it stays accurate at degeneracies).
inline cplx matrix_discriminant(const Mat& a)
{
    const int n = static_cast<int>(a.rows());
    if (n == 2) {
        const cplx d = a(0, 0) - a(1, 1);
        return d * d + 4.0 * a(0, 1) * a(1, 0);
    }
    const auto c = characteristic_coefficients(a);
    // Sylvester matrix of p (degree n) and p' (degree n-1).
    std::vector<cplx> dp(n);
    for (int k = 0; k < n; ++k)
        dp[k] = c[k] * double(n - k);
    const int s = 2 * n - 1;
    Mat syl = Mat::Zero(s, s);
    for (int r = 0; r < n - 1; ++r)
        for (int k = 0; k <= n; ++k)
            syl(r, r + k) = c[k];
    for (int r = 0; r < n; ++r)
        for (int k = 0; k < n; ++k)
            syl(n - 1 + r, r + k) = dp[k];
    const cplx res = syl.partialPivLu().determinant();
    const int sgn = ((n * (n - 1) / 2) % 2) ? -1 : 1;
    return double(sgn) * res;
}

inline cplx discriminant(const ModelSpec& m, cplx t) { return matrix_discriminant(evaluate_h(m, t)); }

// Structural checks that do not need the spectrum.
inline void validate_structure(const ModelSpec& m)
{
    if (m.dimension < 2)
        throw ModelError("model dimension must be at least 2");
    if (static_cast<int>(m.entries.size()) != m.dimension * m.dimension)
        throw ModelError("model needs " + std::to_string(m.dimension * m.dimension) +
                         " polynomial entries, got " + std::to_string(m.entries.size()));
    if (!(m.eta > 0) || !std::isfinite(m.eta))
        throw ModelError("eta must be a positive finite number");
    if (!std::isfinite(m.epsilon))
        throw ModelError("epsilon must be finite");
    double scale = 0;
    for (const auto& p : m.entries)
        for (auto c : p.coeffs) {
            if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                throw ModelError("non-finite polynomial coefficient");
            scale = std::max(scale, std::abs(c));
        }
    if (scale == 0)
        throw ModelError("Hamiltonian is identically zero");
    for (int j = 0; j < m.dimension; ++j)
        for (int k = j; k < m.dimension; ++k) {
            const auto& a = m.entry(j, k);
            const auto& b = m.entry(k, j);
            const int deg = std::max(a.degree(), b.degree());
            for (int p = 0; p <= deg; ++p)
                if (std::abs(a.coeff(p) - std::conj(b.coeff(p))) > 1e-12 * scale)
                    throw ModelError("H(t) is not Hermitian for real t (entry " + std::to_string(j + 1) +
                                     "," + std::to_string(k + 1) + ")");
        }
    for (const auto& s : m.perturbed)
        if (s.row < 0 || s.col < 0 || s.row >= m.dimension || s.col >= m.dimension || s.power < 0)
            throw ModelError("perturbation slot out of range");
}

// Radius containing every zero of the discriminant, from its coefficients
// (obtained by sampling on a circle) and a Fujiwara-type bound.
inline double discriminant_root_bound(const ModelSpec& m)
{
    const int M = m.dimension * (m.dimension - 1) * std::max(1, m.max_degree()) + 1;
    auto bound_from = [&](double rho) {
        std::vector<cplx> vals(M), c(M);
        for (int j = 0; j < M; ++j)
            vals[j] = discriminant(m, std::polar(rho, 2 * M_PI * j / M));
        double cmax = 0;
        for (int k = 0; k < M; ++k) {
            cplx s{};
            for (int j = 0; j < M; ++j)
                s += vals[j] * std::polar(1.0, -2 * M_PI * double(j) * k / M);
            c[k] = s / double(M) / std::pow(rho, k);
            cmax = std::max(cmax, std::abs(c[k]) * std::pow(rho, k));
        }
        int lead = M - 1;
        while (lead > 0 && std::abs(c[lead]) * std::pow(rho, lead) <= 1e-11 * cmax)
            --lead;
        double bound = 0;
        for (int k = 0; k < lead; ++k)
            bound = std::max(bound, std::pow(std::abs(c[k] / c[lead]), 1.0 / (lead - k)));
        return 2.0 * bound;
    };
    double r = bound_from(1.0);
    if (r > 4.0 || (r > 0 && r < 0.25))
        r = bound_from(r);
    return r;
}

// Throws ModelError when the real-axis spectrum has a degeneracy.
inline void validate_gapped(const ModelSpec& m)
{
    const ModelSpec m0 = m.with_epsilon(0.0);
    const double R = discriminant_root_bound(m0);
    if (R == 0.0)
        return;
    const double h = 1e-7 * (1.0 + R);
    auto d = [&](cplx t) { return discriminant(m0, t); };
    int n = 0;
    try {
        n = count_zeros(d, Rect{-1.05 * R - 1, 1.05 * R + 1, -h, h});
    } catch (const NumericalError&) {
        n = -1;
    }
    if (n != 0)
        throw ModelError("spectrum is gapless on the real axis (" + m.label + ")");
}

inline void validate(const ModelSpec& m)
{
    validate_structure(m);
    validate_gapped(m);
}

// Built-in families.
inline ModelSpec builtin(const std::string& name, const std::map<std::string, double>& params)
{
    auto get = [&](const char* key, double def) {
        auto it = params.find(key);
        return it == params.end() ? def : it->second;
    };
    auto allow = [&](std::initializer_list<const char*> keys) {
        for (const auto& [k, v] : params) {
            bool ok = false;
            for (auto a : keys)
                ok = ok || k == a;
            if (!ok)
                throw ModelError("unknown parameter '" + k + "' for built-in model " + name);
            if (!std::isfinite(v))
                throw ModelError("parameter '" + k + "' is not finite");
        }
    };
    ModelSpec m;
    m.builtin_name = name;
    if (name == "nlzsm") {
        allow({"n", "v", "delta", "eta", "epsilon"});
        const double nd = get("n", 1);
        if (nd < 1 || nd != std::floor(nd))
            throw ModelError("nlzsm: n must be a positive integer");
        const int n = static_cast<int>(nd);
        const double v = get("v", 1.0), delta = get("delta", 1.0);
        if (v == 0)
            throw ModelError("nlzsm: sweep velocity v must be nonzero");
        m.dimension = 2;
        m.entries = {Polynomial::monomial(v, n), Polynomial::constant(delta),
                     Polynomial::constant(delta), Polynomial::monomial(-v, n)};
        m.perturbed = {{0, 0, n}, {1, 1, n}};
        m.label = "nlzsm n=" + std::to_string(n);
        m.builtin_params = {{"n", nd}, {"v", v}, {"delta", delta}};
    } else if (name == "lzsm3") {
        allow({"v1", "v2", "a", "delta12", "delta13", "delta23", "eta", "epsilon"});
        const double v1 = get("v1", 1.0), v2 = get("v2", 2.0), a = get("a", 4.0);
        const double d12 = get("delta12", 0.5), d13 = get("delta13", 0.5), d23 = get("delta23", 0.5);
        m.dimension = 3;
        m.entries = {Polynomial({0.0, v1}),          Polynomial::constant(d12), Polynomial::constant(d13),
                     Polynomial::constant(d12),      Polynomial({a, v2}),       Polynomial::constant(d23),
                     Polynomial::constant(d13),      Polynomial::constant(d23), Polynomial()};
        m.perturbed = {{0, 0, 1}, {1, 1, 1}};
        m.label = "lzsm3";
        m.builtin_params = {{"v1", v1}, {"v2", v2}, {"a", a}, {"delta12", d12}, {"delta13", d13}, {"delta23", d23}};
    } else {
        throw ModelError("unknown built-in model '" + name + "'");
    }
    m.eta = get("eta", 1.0);
    m.epsilon = get("epsilon", 0.0);
    m.builtin_params["eta"] = m.eta;
    m.builtin_params["epsilon"] = m.epsilon;
    validate(m);
    return m;
}

} // namespace ewkb
