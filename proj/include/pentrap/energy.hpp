#pragma once
#include "pentrap/potential.hpp"

namespace pentrap {

// Rotating-frame energy decomposition. pe is measured from a reference
// configuration (normally the zero-temperature equilibrium at the same wall
// parameters), so an ideal cold crystal reports pe = 0.
struct EnergyReport {
    double ke_parallel;  // sum of m vz^2 / 2 [J]
    double ke_perp;      // sum of m (vx^2+vy^2)/2 [J]
    double pe;           // U(state) - U(reference) [J]

    double total() const { return ke_parallel + ke_perp + pe; }
};

inline double kinetic_parallel(const CrystalState& s, double mass) {
    const int n = s.n();
    double k = 0.0;
    for (int i = 0; i < n; ++i) k += s.vel[2 * n + i] * s.vel[2 * n + i];
    return 0.5 * mass * k;
}

inline double kinetic_perp(const CrystalState& s, double mass) {
    const int n = s.n();
    double k = 0.0;
    for (int i = 0; i < n; ++i) k += s.vel[i] * s.vel[i] + s.vel[n + i] * s.vel[n + i];
    return 0.5 * mass * k;
}

// state must be in the rotating frame matching wall.
inline EnergyReport energy_report(const CrystalState& state, const TrapConfig& trap,
                                  const WallParams& wall, const Eigen::VectorXd& reference_pos) {
    if (state.frame != Frame::rotating)
        throw Error("energy_report: state must be in the rotating frame");
    if (reference_pos.size() != state.pos.size())
        throw Error("energy_report: missing or mismatched reference equilibrium");
    const double u = potential_energy_rotating(state.pos, trap, wall);
    const double u0 = potential_energy_rotating(reference_pos, trap, wall);
    return {kinetic_parallel(state, trap.ion.mass), kinetic_perp(state, trap.ion.mass), u - u0};
}

// Total rotating-frame energy with no reference offset; conserved by the
// dynamics when the wall parameters are constant in time.
inline double rotating_frame_energy(const CrystalState& state, const TrapConfig& trap,
                                    const WallParams& wall) {
    return kinetic_parallel(state, trap.ion.mass) + kinetic_perp(state, trap.ion.mass) +
           potential_energy_rotating(state.pos, trap, wall);
}

} // namespace pentrap
