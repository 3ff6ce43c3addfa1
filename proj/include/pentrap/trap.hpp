#pragma once
#include <cmath>
#include <string>

#include "pentrap/constants.hpp"
#include "pentrap/errors.hpp"

namespace pentrap {

// Static trap parameters. The magnetic field points along -z (magnitude
// b_field); with positive ions this makes the crystal and the wall rotate
// counterclockwise at +omega_r about z, and the rotating-frame reduction
// below comes out with the standard sign.
struct TrapConfig {
    double b_field;   // field magnitude [T]
    double omega_z;   // axial angular frequency [rad/s]
    IonSpecies ion;

    double omega_c() const { return ion.charge * b_field / ion.mass; }
};

inline TrapConfig default_trap() {
    return {4.4588, consts::two_pi * 1.58e6, beryllium9_ion()};
}

// Dimensionless planar confinement: beta = omega_r (omega_c - omega_r)/omega_z^2 - 1/2.
inline double compute_beta(const TrapConfig& trap, double omega_r) {
    const double wc = trap.omega_c();
    if (!(omega_r > 0.0) || !(omega_r < wc))
        throw ConfinementError("compute_beta: omega_r must lie in (0, omega_c), got " +
                               std::to_string(omega_r));
    return omega_r * (wc - omega_r) / (trap.omega_z * trap.omega_z) - 0.5;
}

// Rotating-wall parameters at one instant: rotation rate and quadrupole
// strength delta (adds +delta to the x^2 and -delta to the y^2 trap term
// in the rotating frame, in units of m omega_z^2 / 2).
struct WallParams {
    double omega_r;  // [rad/s]
    double delta;    // dimensionless, 0 <= delta < beta for a confined crystal

    double beta(const TrapConfig& trap) const { return compute_beta(trap, omega_r); }
    double alpha(const TrapConfig& trap) const { return delta / beta(trap); }
};

// Wall with delta chosen as a fixed fraction of beta(omega_r).
inline WallParams wall_from_alpha(const TrapConfig& trap, double omega_r, double alpha) {
    return {omega_r, alpha * compute_beta(trap, omega_r)};
}

inline void require_confining(const TrapConfig& trap, const WallParams& wall) {
    const double b = wall.beta(trap);
    if (!(b > 0.0) || !(wall.delta >= 0.0) || !(b > wall.delta))
        throw ConfinementError("wall not confining: beta = " + std::to_string(b) +
                               ", delta = " + std::to_string(wall.delta));
}

} // namespace pentrap
