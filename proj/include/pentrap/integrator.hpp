#pragma once
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "pentrap/energy.hpp"
#include "pentrap/forces.hpp"
#include "pentrap/laser_cooling.hpp"
#include "pentrap/schedule.hpp"

namespace pentrap {

struct IntegratorConfig {
    double dt = 1e-9;          // [s]
    int record_stride = 250;   // steps between recorded frames
    double escape_radius = 100.0;  // in units of l0 at the initial beta
};

// Recorded lab-frame samples plus cheap per-frame rotating-frame energy
// splits (kinetic parallel/perp and raw potential, no reference offset).
struct Trajectory {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> pos;  // lab frame
    std::vector<Eigen::VectorXd> vel;
    std::vector<double> ke_par, ke_perp, pe_raw;
    WallSchedule schedule;
    double dt = 0.0;
    int stride = 0;
    CrystalState final_state;

    int frames() const { return static_cast<int>(times.size()); }

    CrystalState frame_state(int k) const {
        return {pos[k], vel[k], times[k], Frame::lab};
    }
};

// Volume-preserving splitting step: half drift, electric half-kick, exact
// magnetic rotation through omega_c dt, electric half-kick, half drift. The
// wall angle is evaluated at the step midpoint. Supports negative dt (the
// map is the exact inverse of the forward step).
//
// With cooling enabled, one Bernoulli photon-scatter pass follows each
// conservative step. Single-threaded and deterministic for a fixed seed.
inline void evolve(CrystalState& state, const TrapConfig& trap, const WallSchedule& schedule,
                   const IntegratorConfig& cfg, double duration,
                   const CoolingConfig* cooling = nullptr, std::mt19937_64* rng = nullptr,
                   Trajectory* out = nullptr) {
    if (state.frame != Frame::lab) throw Error("evolve: state must be in the lab frame");
    const int n = state.n();
    const double dt = cfg.dt * (duration < 0.0 ? -1.0 : 1.0);
    const std::int64_t nsteps = std::llround(std::abs(duration) / cfg.dt);
    const ForceContext fc(trap);

    const double beta0 = compute_beta(trap, omega_r_at(schedule, state.time));
    const double l0 = std::cbrt(consts::k_e * trap.ion.charge * trap.ion.charge /
                                (0.5 * beta0 * trap.ion.mass * trap.omega_z * trap.omega_z));
    const double r_escape = cfg.escape_radius * l0;

    const double cos_c = std::cos(fc.omega_c * dt), sin_c = std::sin(fc.omega_c * dt);
    Eigen::VectorXd acc(3 * n);
    double* vx = state.vel.data();
    double* vy = state.vel.data() + n;

    if (out) {
        out->schedule = schedule;
        out->dt = dt;
        out->stride = cfg.record_stride;
    }
    auto record = [&]() {
        if (!out) return;
        out->times.push_back(state.time);
        out->pos.push_back(state.pos);
        out->vel.push_back(state.vel);
        const WallParams w = wall_at(schedule, trap, state.time);
        CrystalState rot = to_rotating_frame(state, theta_r_at(schedule, state.time), w.omega_r);
        out->ke_par.push_back(kinetic_parallel(rot, trap.ion.mass));
        out->ke_perp.push_back(kinetic_perp(rot, trap.ion.mass));
        out->pe_raw.push_back(potential_energy_rotating(rot.pos, trap, w));
    };
    auto check_escape = [&]() {
        for (int i = 0; i < n; ++i) {
            const double r2 = state.pos[i] * state.pos[i] + state.pos[n + i] * state.pos[n + i] +
                              state.pos[2 * n + i] * state.pos[2 * n + i];
            if (r2 > r_escape * r_escape)
                throw DivergenceError(i, state.time,
                                      "ion " + std::to_string(i) + " escaped at t = " +
                                          std::to_string(state.time) + " s");
        }
    };

    for (std::int64_t step = 0; step < nsteps; ++step) {
        if (step % cfg.record_stride == 0) {
            check_escape();
            record();
        }
        const double t_mid = state.time + 0.5 * dt;
        // half drift
        state.pos.noalias() += (0.5 * dt) * state.vel;
        // kick: half electric, exact magnetic rotation, half electric
        accel_electric_lab(state.pos.data(), n, fc, delta_at(schedule, trap, t_mid),
                           theta_r_at(schedule, t_mid), acc.data());
        state.vel.noalias() += (0.5 * dt) * acc;
        for (int i = 0; i < n; ++i) {
            const double ux = vx[i], uy = vy[i];
            vx[i] = cos_c * ux - sin_c * uy;
            vy[i] = sin_c * ux + cos_c * uy;
        }
        state.vel.noalias() += (0.5 * dt) * acc;
        // half drift
        state.pos.noalias() += (0.5 * dt) * state.vel;
        state.time += dt;

        if (cooling && rng && !cooling->beams.empty())
            apply_cooling_step(state, trap, *cooling, dt, *rng);
    }
    check_escape();
    if (out) out->final_state = state;
}

} // namespace pentrap
