#pragma once
#include <stdexcept>
#include <string>

namespace pentrap {

// Base for everything thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Two ions closer than the hard-core guard distance.
struct CoincidenceError : Error {
    int i, j;
    CoincidenceError(int i_, int j_, const std::string& msg) : Error(msg), i(i_), j(j_) {}
};

// Effective planar confinement lost (beta <= delta or beta <= 0).
struct ConfinementError : Error {
    using Error::Error;
};

// Minimizer failed to reach the gradient tolerance.
struct ConvergenceError;

// An ion left the trap region during integration.
struct DivergenceError : Error {
    int ion;
    double time;
    DivergenceError(int ion_, double t, const std::string& msg) : Error(msg), ion(ion_), time(t) {}
};

// Mode analysis hit an unstable (non positive definite) Hamiltonian.
struct InstabilityError : Error {
    double offending_eigenvalue;
    InstabilityError(double ev, const std::string& msg) : Error(msg), offending_eigenvalue(ev) {}
};

// Per-step scattering probability too large for Bernoulli sampling.
struct RateError : Error {
    using Error::Error;
};

// Metropolis proposal tuning failed to land in a usable acceptance band.
struct TuningError : Error {
    double acceptance;
    TuningError(double a, const std::string& msg) : Error(msg), acceptance(a) {}
};

// Config or file validation failure; names the offending field.
struct ValidationError : Error {
    std::string field;
    ValidationError(std::string f, const std::string& msg) : Error(msg), field(std::move(f)) {}
};

// Binary trajectory file malformed or checksum mismatch.
struct FormatError : Error {
    using Error::Error;
};

} // namespace pentrap
