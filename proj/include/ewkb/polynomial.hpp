#pragma once

#include "ewkb/errors.hpp"

#include <vector>

namespace ewkb {

// Polynomial in t with complex coefficients, lowest power first.
struct Polynomial {
    std::vector<cplx> coeffs;

    Polynomial() = default;
    Polynomial(std::vector<cplx> c) : coeffs(std::move(c)) { trim(); }
    static Polynomial constant(cplx c) { return Polynomial({c}); }
    static Polynomial monomial(cplx c, int power)
    {
        std::vector<cplx> v(power + 1, 0.0);
        v[power] = c;
        return Polynomial(std::move(v));
    }

    int degree() const { return coeffs.empty() ? -1 : static_cast<int>(coeffs.size()) - 1; }
    bool is_zero() const { return coeffs.empty(); }

    cplx operator()(cplx t) const
    {
        cplx r{};
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
            r = r * t + *it;
        return r;
    }

    Polynomial derivative() const
    {
        if (coeffs.size() <= 1)
            return {};
        std::vector<cplx> d(coeffs.size() - 1);
        for (std::size_t k = 1; k < coeffs.size(); ++k)
            d[k - 1] = coeffs[k] * double(k);
        return Polynomial(std::move(d));
    }

    cplx coeff(int k) const { return k >= 0 && k <= degree() ? coeffs[k] : cplx{}; }

    void trim()
    {
        while (!coeffs.empty() && coeffs.back() == cplx{})
            coeffs.pop_back();
    }
};

} // namespace ewkb
