#pragma once
#include <cmath>

namespace pentrap {

// CODATA 2018 values, SI units throughout.
namespace consts {
inline constexpr double pi        = 3.14159265358979323846;
inline constexpr double two_pi    = 2.0 * pi;
inline constexpr double q_e       = 1.602176634e-19;        // elementary charge [C]
inline constexpr double k_B       = 1.380649e-23;           // Boltzmann [J/K]
inline constexpr double hbar      = 1.054571817e-34;        // reduced Planck [J s]
inline constexpr double amu       = 1.66053906660e-27;      // atomic mass unit [kg]
inline constexpr double m_e       = 9.1093837015e-31;       // electron mass [kg]
inline constexpr double k_e       = 8.9875517873681764e9;   // Coulomb constant [N m^2/C^2]
} // namespace consts

struct IonSpecies {
    double mass;    // [kg]
    double charge;  // [C]
};

// Singly ionized 9Be: neutral atomic mass minus one electron.
inline IonSpecies beryllium9_ion() {
    return {9.0121831 * consts::amu - consts::m_e, consts::q_e};
}

inline double to_millikelvin(double energy_joules) {
    return energy_joules / consts::k_B * 1e3;
}

} // namespace pentrap
