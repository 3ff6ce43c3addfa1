#pragma once
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "pentrap/state.hpp"

namespace pentrap {

enum class BeamGeometry {
    axial_pair,  // counter-propagating pair along +-z, uniform intensity
    planar       // single beam along lab +x, Gaussian profile in (y - offset_y, z)
};

// How the spontaneous-emission recoil direction is drawn.
enum class EmissionPattern { isotropic, dipole_sigma, along_beam };

struct BeamConfig {
    BeamGeometry geometry = BeamGeometry::axial_pair;
    double saturation = 5e-3;                       // peak s0 (per beam for the axial pair)
    double detuning = -consts::pi * 18e6;           // Delta [rad/s], default -gamma0/2
    double wavelength = 313e-9;                     // [m]
    double gamma0 = consts::two_pi * 18e6;          // natural linewidth [rad/s]
    double waist = 30e-6;                           // W0 [m], planar geometry only
    // Beam center offset along y [m]. The crystal rotates in the +z sense, so
    // ions at y < 0 co-move with the +x beam: their Doppler shift lands deep
    // red of resonance, where dF/dv < 0 (damping). A positive offset puts the
    // bright spot on counter-moving ions (blue side, dF/dv > 0) and torques
    // the crystal out of wall lock instead of cooling it.
    double offset_y = -20e-6;

    double k() const { return consts::two_pi / wavelength; }
};

struct CoolingConfig {
    std::vector<BeamConfig> beams;
    EmissionPattern emission = EmissionPattern::isotropic;
};

inline double doppler_limit(double gamma0) { return consts::hbar * gamma0 / (2.0 * consts::k_B); }

// Local saturation parameter at lab position (x,y,z) for one beam.
inline double local_saturation(const BeamConfig& b, double /*x*/, double y, double z) {
    if (b.geometry == BeamGeometry::axial_pair) return b.saturation;
    const double dy = y - b.offset_y;
    return b.saturation * std::exp(-2.0 * (dy * dy + z * z) / (b.waist * b.waist));
}

// Photon scattering rate for one beam direction khat (unit vector):
//   rate = (gamma0/2) s / (1 + s + (2 (Delta - k.v) / gamma0)^2)
inline double scattering_rate(const BeamConfig& b, const std::array<double, 3>& khat,
                              const std::array<double, 3>& vel, double x, double y, double z) {
    const double s = local_saturation(b, x, y, z);
    if (s <= 0.0) return 0.0;
    const double kdotv = b.k() * (khat[0] * vel[0] + khat[1] * vel[1] + khat[2] * vel[2]);
    const double d = 2.0 * (b.detuning - kdotv) / b.gamma0;
    return 0.5 * b.gamma0 * s / (1.0 + s + d * d);
}

namespace detail {

inline std::array<double, 3> emission_direction(EmissionPattern pattern,
                                                const std::array<double, 3>& khat,
                                                std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    switch (pattern) {
        case EmissionPattern::along_beam:
            return uni(rng) < 0.5 ? khat
                                  : std::array<double, 3>{-khat[0], -khat[1], -khat[2]};
        case EmissionPattern::dipole_sigma: {
            // pdf(cos t) = 3/8 (1 + cos^2 t) about zhat; rejection sample
            double c;
            do {
                c = 2.0 * uni(rng) - 1.0;
            } while (uni(rng) > 0.5 * (1.0 + c * c));
            const double phi = consts::two_pi * uni(rng);
            const double r = std::sqrt(1.0 - c * c);
            return {r * std::cos(phi), r * std::sin(phi), c};
        }
        case EmissionPattern::isotropic:
        default: {
            const double c = 2.0 * uni(rng) - 1.0;
            const double phi = consts::two_pi * uni(rng);
            const double r = std::sqrt(1.0 - c * c);
            return {r * std::cos(phi), r * std::sin(phi), c};
        }
    }
}

} // namespace detail

// One Monte Carlo cooling substep of length dt on a lab-frame state. Beams
// are processed in order (the axial pair as +z then -z), ions in ascending
// index, so a fixed seed reproduces the exact same photon record.
inline void apply_cooling_step(CrystalState& state, const TrapConfig& trap,
                               const CoolingConfig& cooling, double dt, std::mt19937_64& rng) {
    const int n = state.n();
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double inv_mass = 1.0 / trap.ion.mass;

    for (const BeamConfig& b : cooling.beams) {
        std::array<std::array<double, 3>, 2> dirs;
        int ndir = 1;
        if (b.geometry == BeamGeometry::axial_pair) {
            dirs[0] = {0.0, 0.0, 1.0};
            dirs[1] = {0.0, 0.0, -1.0};
            ndir = 2;
        } else {
            dirs[0] = {1.0, 0.0, 0.0};
        }
        const double vkick = consts::hbar * b.k() * inv_mass;
        for (int d = 0; d < ndir; ++d) {
            const auto& khat = dirs[d];
            for (int i = 0; i < n; ++i) {
                const std::array<double, 3> v = {state.vel[i], state.vel[n + i],
                                                 state.vel[2 * n + i]};
                const double rate =
                    scattering_rate(b, khat, v, state.pos[i], state.pos[n + i], state.pos[2 * n + i]);
                const double p = rate * dt;
                if (p >= 0.1)
                    throw RateError("scattering probability per step too large: " +
                                    std::to_string(p));
                if (p <= 0.0) continue;
                if (uni(rng) >= p) continue;
                const auto e = detail::emission_direction(cooling.emission, khat, rng);
                state.vel[i] += vkick * (khat[0] + e[0]);
                state.vel[n + i] += vkick * (khat[1] + e[1]);
                state.vel[2 * n + i] += vkick * (khat[2] + e[2]);
            }
        }
    }
}

// Table-style default beams.
inline BeamConfig default_axial_beams() {
    BeamConfig b;
    b.geometry = BeamGeometry::axial_pair;
    b.saturation = 5e-3;
    b.gamma0 = consts::two_pi * 18e6;
    b.detuning = -0.5 * b.gamma0;
    b.wavelength = 313e-9;
    return b;
}

inline BeamConfig default_planar_beam() {
    BeamConfig b;
    b.geometry = BeamGeometry::planar;
    b.saturation = 1.0;
    b.gamma0 = consts::two_pi * 18e6;
    b.detuning = -consts::two_pi * 40e6;
    b.wavelength = 313e-9;
    b.waist = 30e-6;
    b.offset_y = -20e-6;
    return b;
}

} // namespace pentrap
