#pragma once

#include <complex>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ewkb {

using cplx = std::complex<double>;

// Model file or model parameters are unusable (exit code 2 in the CLI).
class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A method was asked for something outside its domain, e.g. DDP on a
// three-level model.
class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Iterative or adaptive numerics gave up.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Spectrum or Stokes-graph degeneracy that could not be resolved.
class DegeneracyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Lexicographic order on (Re, Im), used wherever output must be deterministic.
inline bool lex_less(cplx x, cplx y)
{
    return x.real() < y.real() || (x.real() == y.real() && x.imag() < y.imag());
}

inline std::string fmt_c(cplx z)
{
    std::ostringstream os;
    os.precision(10);
    os << z.real() << (z.imag() < 0 ? "-" : "+") << std::abs(z.imag()) << "i";
    return os.str();
}

} // namespace ewkb
