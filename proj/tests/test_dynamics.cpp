// Integrator properties: exact reversibility, rotating-frame energy
// conservation, determinism, escape detection, and single-ion mode
// frequencies recovered from simulated orbits.
#include <catch2/catch_amalgamated.hpp>

#include "pentrap/pentrap.hpp"

using namespace pentrap;
using Catch::Approx;

namespace {
const TrapConfig trap = default_trap();
const double wr200 = consts::two_pi * 200e3;

WallSchedule const_wall_200(double alpha = 0.5) {
    return WallSchedule::constant_wall(wr200, AlphaPolicy::fixed_alpha, alpha);
}
} // namespace

TEST_CASE("wall schedules are continuous and integrate omega") {
    const double wi = consts::two_pi * 200e3, wf = consts::two_pi * 180e3, T = 1e-3;
    for (RampKind kind : {RampKind::linear, RampKind::half_cosine}) {
        WallSchedule s{kind, wi, wf, T, AlphaPolicy::fixed_alpha, 0.5};
        CHECK(omega_r_at(s, -1.0) == wi);
        CHECK(omega_r_at(s, 0.0) == Approx(wi).epsilon(1e-14));
        CHECK(omega_r_at(s, T) == Approx(wf).epsilon(1e-14));
        CHECK(omega_r_at(s, 2.0 * T) == wf);
        // theta(T): both ramp laws sweep the mean frequency
        CHECK(theta_r_at(s, T) == Approx(0.5 * (wi + wf) * T).epsilon(1e-12));
        // d theta / dt == omega_r at interior points and past the ramp
        for (double t : {0.15 * T, 0.5 * T, 0.81 * T, 1.7 * T}) {
            const double h = 1e-9;
            const double fd = (theta_r_at(s, t + h) - theta_r_at(s, t - h)) / (2.0 * h);
            CHECK(fd == Approx(omega_r_at(s, t)).epsilon(1e-6));
        }
        // before the anchor, uniform rotation at the initial rate
        CHECK(theta_r_at(s, -2e-4) == Approx(-wi * 2e-4).epsilon(1e-12));
    }
    // half-cosine has zero slope at both ends
    WallSchedule hc{RampKind::half_cosine, wi, wf, T, AlphaPolicy::fixed_alpha, 0.5};
    CHECK(omega_r_at(hc, 1e-7) == Approx(wi).epsilon(1e-7));
    CHECK(omega_r_at(hc, T - 1e-7) == Approx(wf).epsilon(1e-7));
}

TEST_CASE("fixed-alpha schedules track beta, fixed-delta ones do not") {
    const double wi = consts::two_pi * 200e3, wf = consts::two_pi * 180e3, T = 1e-3;
    WallSchedule fa{RampKind::linear, wi, wf, T, AlphaPolicy::fixed_alpha, 0.5};
    WallSchedule fd{RampKind::linear, wi, wf, T, AlphaPolicy::fixed_delta, 0.02};
    for (double t : {0.0, 0.3 * T, T}) {
        const WallParams w = wall_at(fa, trap, t);
        CHECK(w.alpha(trap) == Approx(0.5).epsilon(1e-12));
        CHECK(wall_at(fd, trap, t).delta == 0.02);
    }
}

TEST_CASE("backward integration undoes forward integration exactly") {
    const WallSchedule sched = const_wall_200();
    const WallParams wall = wall_at(sched, trap, 0.0);
    const EquilibriumConfig eq = find_equilibrium(5, trap, wall);
    const ModeAnalysis ma = analyze_modes(eq, trap, wall);

    std::mt19937_64 rng(77);
    CrystalState rot = init_modes_at_temperature(ma, 1e-3, rng);
    CrystalState s = to_lab_frame(rot, 0.0, wall.omega_r);
    const CrystalState s0 = s;

    IntegratorConfig cfg;
    cfg.dt = 1e-9;
    evolve(s, trap, sched, cfg, 2e-5);
    CHECK(s.time == Approx(2e-5).epsilon(1e-9));
    evolve(s, trap, sched, cfg, -2e-5);

    const double pos_scale = s0.pos.cwiseAbs().maxCoeff();
    const double vel_scale = s0.vel.cwiseAbs().maxCoeff();
    CHECK((s.pos - s0.pos).cwiseAbs().maxCoeff() < 1e-10 * pos_scale);
    CHECK((s.vel - s0.vel).cwiseAbs().maxCoeff() < 1e-10 * vel_scale);
    CHECK(s.time == Approx(0.0).margin(1e-16));
}

TEST_CASE("rotating-frame energy is conserved under a constant wall") {
    const WallSchedule sched = const_wall_200();
    const WallParams wall = wall_at(sched, trap, 0.0);
    const EquilibriumConfig eq = find_equilibrium(6, trap, wall);
    const ModeAnalysis ma = analyze_modes(eq, trap, wall);

    std::mt19937_64 rng(13);
    CrystalState rot = init_modes_at_temperature(ma, 1e-3, rng);
    CrystalState s = to_lab_frame(rot, 0.0, wall.omega_r);

    IntegratorConfig cfg;
    cfg.dt = 1e-9;
    cfg.record_stride = 100;
    Trajectory traj;
    evolve(s, trap, sched, cfg, 1e-4, nullptr, nullptr, &traj);
    REQUIRE(traj.frames() == 1000);

    const double thermal = 3.0 * 6 * consts::k_B * 1e-3;
    double e_ref = 0.0, worst = 0.0;
    for (int k = 0; k < traj.frames(); ++k) {
        const CrystalState lab = traj.frame_state(k);
        const CrystalState r =
            to_rotating_frame(lab, theta_r_at(sched, lab.time), wall.omega_r);
        const double e = rotating_frame_energy(r, trap, wall);
        if (k == 0)
            e_ref = e;
        else
            worst = std::max(worst, std::abs(e - e_ref));
    }
    CHECK(worst < 0.02 * thermal);
}

TEST_CASE("recorded energy splits match recomputation from the frames") {
    const WallSchedule sched = const_wall_200();
    const WallParams wall = wall_at(sched, trap, 0.0);
    const EquilibriumConfig eq = find_equilibrium(4, trap, wall);
    const ModeAnalysis ma = analyze_modes(eq, trap, wall);

    std::mt19937_64 rng(5);
    CrystalState s = to_lab_frame(init_modes_at_temperature(ma, 2e-3, rng), 0.0, wall.omega_r);

    IntegratorConfig cfg;
    cfg.dt = 1e-9;
    cfg.record_stride = 500;
    Trajectory traj;
    evolve(s, trap, sched, cfg, 2e-5, nullptr, nullptr, &traj);
    REQUIRE(traj.frames() == 40);
    CHECK(traj.dt == 1e-9);
    CHECK(traj.stride == 500);
    CHECK(traj.final_state.time == Approx(2e-5).epsilon(1e-12));

    for (int k = 0; k < traj.frames(); k += 7) {
        const CrystalState lab = traj.frame_state(k);
        const WallParams w = wall_at(sched, trap, lab.time);
        const CrystalState r = to_rotating_frame(lab, theta_r_at(sched, lab.time), w.omega_r);
        CHECK(traj.ke_par[k] == Approx(kinetic_parallel(r, trap.ion.mass)).epsilon(1e-12));
        CHECK(traj.ke_perp[k] == Approx(kinetic_perp(r, trap.ion.mass)).epsilon(1e-12));
        CHECK(traj.pe_raw[k] ==
              Approx(potential_energy_rotating(r.pos, trap, w)).epsilon(1e-12));
    }
}

TEST_CASE("identical seeds give bit-identical cooled trajectories") {
    const WallSchedule sched = const_wall_200();
    const WallParams wall = wall_at(sched, trap, 0.0);
    const EquilibriumConfig eq = find_equilibrium(3, trap, wall);
    const ModeAnalysis ma = analyze_modes(eq, trap, wall);

    std::mt19937_64 init_rng(21);
    const CrystalState start =
        to_lab_frame(init_modes_at_temperature(ma, 1e-3, init_rng), 0.0, wall.omega_r);

    CoolingConfig cooling;
    cooling.beams = {default_axial_beams()};

    IntegratorConfig cfg;
    cfg.dt = 1e-9;
    auto run = [&](std::uint64_t seed) {
        CrystalState s = start;
        std::mt19937_64 rng(seed);
        evolve(s, trap, sched, cfg, 5e-6, &cooling, &rng);
        return s;
    };
    const CrystalState a = run(1234), b = run(1234), c = run(4321);
    CHECK((a.pos.array() == b.pos.array()).all());
    CHECK((a.vel.array() == b.vel.array()).all());
    // and a different seed actually scatters differently
    CHECK((a.vel.array() != c.vel.array()).any());
}

TEST_CASE("an escaping ion raises a divergence error naming it") {
    const WallSchedule sched = const_wall_200();
    CrystalState s = CrystalState::zero(2);
    s.pos << 2e-3, -1e-5, 0.0, 1e-5, 0.0, 0.0;  // ion 0 far outside the escape radius

    IntegratorConfig cfg;
    cfg.dt = 1e-9;
    try {
        evolve(s, trap, sched, cfg, 1e-6);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.ion == 0);
        CHECK(e.time == 0.0);
    }
}

TEST_CASE("evolve rejects rotating-frame input") {
    const WallSchedule sched = const_wall_200();
    CrystalState s = CrystalState::zero(1, Frame::rotating);
    IntegratorConfig cfg;
    CHECK_THROWS_AS(evolve(s, trap, sched, cfg, 1e-7), Error);
}

TEST_CASE("single-ion slow mode oscillates at the closed-form frequency") {
    const WallSchedule sched = const_wall_200();
    const WallParams wall = wall_at(sched, trap, 0.0);
    const EquilibriumConfig eq = find_equilibrium(1, trap, wall);
    const ModeAnalysis ma = analyze_modes(eq, trap, wall);
    REQUIRE(ma.spectrum.n == 1);

    // put k_B x 1 mK into the slow mode only
    Eigen::VectorXd energies = Eigen::VectorXd::Zero(3);
    energies[0] = consts::k_B * 1e-3;
    std::mt19937_64 rng(3);
    const CrystalState start =
        to_lab_frame(init_modes_with_energies(ma, energies, rng), 0.0, wall.omega_r);

    // fit the phase slope of the slow normal coordinate
    auto measured_omega = [&](double dt, bool check_energy) {
        IntegratorConfig cfg;
        cfg.dt = dt;
        cfg.record_stride = 25;
        Trajectory traj;
        CrystalState s = start;
        evolve(s, trap, sched, cfg, 7.2e-5, nullptr, nullptr, &traj);

        double sum_t = 0, sum_tt = 0, sum_p = 0, sum_tp = 0;
        double prev = 0.0, offset = 0.0;
        const int m = traj.frames();
        for (int k = 0; k < m; ++k) {
            const CrystalState lab = traj.frame_state(k);
            const CrystalState r =
                to_rotating_frame(lab, theta_r_at(sched, lab.time), wall.omega_r);
            const Eigen::VectorXd y = normal_coordinates(ma, r);
            double phi = std::atan2(y[1], y[0]);
            if (k > 0) {
                while (phi + offset - prev > consts::pi) offset -= consts::two_pi;
                while (phi + offset - prev < -consts::pi) offset += consts::two_pi;
            }
            phi += offset;
            prev = phi;
            if (check_energy) {
                const ModeEnergyReport rep = project_mode_energies(ma, r);
                // linearization is exact for one ion: the slow mode keeps its
                // energy and nothing leaks into the axial or fast mode
                CHECK(rep.energies[0] == Approx(consts::k_B * 1e-3).epsilon(5e-3));
                CHECK(rep.energies[1] + rep.energies[2] < 1e-3 * consts::k_B * 1e-3);
            }
            sum_t += lab.time;
            sum_tt += lab.time * lab.time;
            sum_p += phi;
            sum_tp += lab.time * phi;
        }
        return std::abs((m * sum_tp - sum_t * sum_p) / (m * sum_tt - sum_t * sum_t));
    };

    const double w_ref = 174146.7111730078;
    const double dev1 = std::abs(measured_omega(1e-9, true) - w_ref);
    const double dev2 = std::abs(measured_omega(0.5e-9, false) - w_ref);
    CHECK(dev1 < 3e-3 * w_ref);
    // splitting error is second order in dt: halving dt cuts the bias ~4x
    CHECK(dev2 < 0.30 * dev1);
}

TEST_CASE("ramping the wall leaves the crystal near the new equilibrium") {
    // slow half-cosine ramp 200 -> 190 kHz at fixed alpha: a cold crystal
    // should arrive essentially cold at the new wall
    const double wi = wr200, wf = consts::two_pi * 190e3, T = 4e-4;
    WallSchedule sched{RampKind::half_cosine, wi, wf, T, AlphaPolicy::fixed_alpha, 0.5};
    const WallParams wall_i = wall_at(sched, trap, 0.0);
    const WallParams wall_f = wall_at(sched, trap, T);

    const EquilibriumConfig eq_i = find_equilibrium(5, trap, wall_i);
    const EquilibriumConfig eq_f = find_equilibrium(5, trap, wall_f, &eq_i.pos);

    CrystalState rot{eq_i.pos, Eigen::VectorXd::Zero(15), 0.0, Frame::rotating};
    CrystalState s = to_lab_frame(rot, 0.0, wall_i.omega_r);

    IntegratorConfig cfg;
    cfg.dt = 1e-9;
    evolve(s, trap, sched, cfg, T + 1e-4);

    const CrystalState r = to_rotating_frame(s, theta_r_at(sched, s.time), wall_f.omega_r);
    const EnergyReport rep = energy_report(r, trap, wall_f, eq_f.pos);
    // residual motional energy should be far below k_B x 1 mK per mode
    CHECK(rep.total() < 15 * consts::k_B * 1e-4);
    CHECK(rep.pe >= 0.0);
}
