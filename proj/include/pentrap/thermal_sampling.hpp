#pragma once
#include <cmath>
#include <random>
#include <string>

#include "pentrap/constants.hpp"
#include "pentrap/mode_analysis.hpp"

namespace pentrap {

// State with each normal mode carrying the requested energy [J] at a uniform
// random phase.  Positions and velocities come out in the rotating frame.
inline CrystalState init_modes_with_energies(const ModeAnalysis& ma,
                                             const Eigen::VectorXd& mode_energies,
                                             std::mt19937_64& rng, double time = 0.0) {
    const int d = static_cast<int>(ma.eq.pos.size());
    if (mode_energies.size() != d) throw Error("init_modes_with_energies: size mismatch");
    std::uniform_real_distribution<double> phase(0.0, consts::two_pi);
    Eigen::VectorXd y(2 * d);
    for (int m = 0; m < d; ++m) {
        const double amp = std::sqrt(2.0 * std::max(mode_energies[m], 0.0) /
                                     ma.spectrum.energy_unit);
        const double ph = phase(rng);
        y[2 * m] = amp * std::cos(ph);
        y[2 * m + 1] = amp * std::sin(ph);
    }
    return state_from_normal(ma, y, time);
}

// Thermal state in the linear-mode approximation: every mode draws its energy
// from the Boltzmann distribution (exponential, mean k_B T) at a random phase.
inline CrystalState init_modes_at_temperature(const ModeAnalysis& ma, double temperature,
                                              std::mt19937_64& rng, double time = 0.0) {
    const int d = static_cast<int>(ma.eq.pos.size());
    std::exponential_distribution<double> boltzmann(1.0);
    Eigen::VectorXd e(d);
    for (int m = 0; m < d; ++m) e[m] = consts::k_B * temperature * boltzmann(rng);
    return init_modes_with_energies(ma, e, rng, time);
}

struct MetropolisConfig {
    int sweeps = 2000;        // post-burn-in sweeps (one proposal per ion each)
    double initial_step = 0;  // [m]; 0 = auto from the thermal displacement scale
};

// Position sample from exp(-U_rot / k_B T) by single-ion Metropolis moves,
// with Maxwell-Boltzmann velocities attached afterwards.  The proposal width
// is tuned during a 20% burn-in; the run fails if the final acceptance rate
// leaves [0.1, 0.9].
inline CrystalState metropolis_sample(const Eigen::VectorXd& eq_pos, const TrapConfig& trap,
                                      const WallParams& wall, double temperature,
                                      std::mt19937_64& rng,
                                      const MetropolisConfig& cfg = {}) {
    require_confining(trap, wall);
    const int d = static_cast<int>(eq_pos.size());
    const int n = d / 3;
    const double kt = consts::k_B * temperature;
    const double beta = wall.beta(trap);
    const double mwz2 = trap.ion.mass * trap.omega_z * trap.omega_z;

    double sigma = cfg.initial_step > 0 ? cfg.initial_step : std::sqrt(kt / (mwz2 * beta));
    Eigen::VectorXd q = eq_pos;
    double u = potential_energy_rotating(q, trap, wall);

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const int burn = std::max(cfg.sweeps / 5, 50);
    long accepted = 0, proposed = 0;
    const int tune_batch = 25;  // sweeps between step-width adjustments in burn-in

    for (int sweep = 0; sweep < burn + cfg.sweeps; ++sweep) {
        for (int i = 0; i < n; ++i) {
            const double ox = q[i], oy = q[n + i], oz = q[2 * n + i];
            q[i] += sigma * gauss(rng);
            q[n + i] += sigma * gauss(rng);
            q[2 * n + i] += sigma * gauss(rng);
            double ut;
            bool reject = false;
            try {
                ut = potential_energy_rotating(q, trap, wall);
            } catch (const CoincidenceError&) {
                reject = true;
                ut = 0.0;
            }
            ++proposed;
            if (!reject && (ut <= u || unif(rng) < std::exp(-(ut - u) / kt))) {
                u = ut;
                ++accepted;
            } else {
                q[i] = ox;
                q[n + i] = oy;
                q[2 * n + i] = oz;
            }
        }
        if (sweep < burn && (sweep + 1) % tune_batch == 0) {
            const double acc = static_cast<double>(accepted) / proposed;
            if (acc > 0.6)
                sigma *= 1.3;
            else if (acc < 0.4)
                sigma /= 1.3;
            accepted = proposed = 0;
        }
        if (sweep == burn - 1) accepted = proposed = 0;  // count production only
    }

    const double acc = proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0;
    if (acc < 0.1 || acc > 0.9)
        throw TuningError(acc, "metropolis_sample: acceptance rate " + std::to_string(acc) +
                                   " outside [0.1, 0.9]");

    CrystalState st;
    st.frame = Frame::rotating;
    st.time = 0.0;
    st.pos = q;
    st.vel.resize(d);
    const double vth = std::sqrt(kt / trap.ion.mass);
    for (int k = 0; k < d; ++k) st.vel[k] = vth * gauss(rng);
    return st;
}

} // namespace pentrap
