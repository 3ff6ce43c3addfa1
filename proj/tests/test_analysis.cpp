// Trajectory post-processing: spectra, branch energy series, smoothing, and
// ensemble statistics.
#include <catch2/catch_amalgamated.hpp>

#include "pentrap/pentrap.hpp"

using namespace pentrap;
using Catch::Approx;

namespace {
const TrapConfig trap = default_trap();
}

TEST_CASE("power spectrum satisfies parseval and finds a pure tone") {
    const double dt = 1e-6, f0 = 51000.0;
    const int m = 4000;
    std::vector<double> x(m);
    double var = 0.0, mean = 0.0;
    for (int k = 0; k < m; ++k) {
        x[k] = 2.5 + 0.8 * std::sin(consts::two_pi * f0 * k * dt) +
               0.05 * std::sin(consts::two_pi * 3.0 * f0 * k * dt);
        mean += x[k];
    }
    mean /= m;
    for (int k = 0; k < m; ++k) var += (x[k] - mean) * (x[k] - mean);
    var /= m;

    const PsdResult psd = power_spectrum(x, dt);
    CHECK(psd.df == Approx(1.0 / (m * dt)).epsilon(1e-12));
    REQUIRE(psd.freq.size() == psd.power.size());

    double total = 0.0;
    int argmax = 0;
    for (std::size_t k = 0; k < psd.power.size(); ++k) {
        total += psd.power[k];
        if (psd.power[k] > psd.power[argmax]) argmax = static_cast<int>(k);
    }
    CHECK(total == Approx(var).epsilon(1e-10));
    // f0 = 51 kHz lands exactly on bin 204 of a 250 Hz grid
    CHECK(psd.freq[argmax] == Approx(f0).margin(0.5 * psd.df));
    CHECK(psd.power[argmax] == Approx(0.5 * 0.8 * 0.8).epsilon(1e-6));

    const std::vector<int> peaks = psd_peaks(psd, 1e-4);
    REQUIRE(peaks.size() == 2);
    CHECK(psd.freq[peaks[0]] == Approx(f0).margin(0.5 * psd.df));
    CHECK(psd.freq[peaks[1]] == Approx(3.0 * f0).margin(0.5 * psd.df));
}

TEST_CASE("trailing mean averages over the requested window") {
    std::vector<double> t, v;
    for (int k = 0; k < 100; ++k) {
        t.push_back(k * 0.1);
        v.push_back(k < 50 ? 1.0 : 3.0);
    }
    const std::vector<double> sm = detail::trailing_mean(t, v, 1.05);
    CHECK(sm[30] == Approx(1.0).epsilon(1e-12));
    CHECK(sm[99] == Approx(3.0).epsilon(1e-12));
    // straddling the step: 5 old samples, 6 new ones inside the window
    CHECK(sm[54] > 1.5);
    CHECK(sm[54] < 3.0);
    // a window shorter than the spacing leaves the data untouched
    const std::vector<double> none = detail::trailing_mean(t, v, 0.05);
    for (int k = 0; k < 100; ++k) CHECK(none[k] == v[k]);
}

TEST_CASE("ensemble statistics are pointwise") {
    const std::vector<std::vector<double>> members = {
        {1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}, {2.0, 2.0, 2.0}};
    const EnsembleStats st = ensemble_reduce(members);
    REQUIRE(st.mean.size() == 3);
    CHECK(st.mean[0] == Approx(2.0));
    CHECK(st.mean[2] == Approx(2.0));
    CHECK(st.min[0] == 1.0);
    CHECK(st.max[0] == 3.0);
    CHECK(st.stddev[0] == Approx(1.0));          // sample stddev
    CHECK(st.stddev[1] == Approx(0.0).margin(1e-15));

    CHECK_THROWS_AS(ensemble_reduce({{1.0, 2.0}, {1.0}}), Error);
}

TEST_CASE("branch energies track a thermal crystal at the right magnitude") {
    const WallSchedule sched =
        WallSchedule::constant_wall(consts::two_pi * 200e3, AlphaPolicy::fixed_alpha, 0.5);
    const WallParams wall = wall_at(sched, trap, 0.0);
    const EquilibriumConfig eq = find_equilibrium(6, trap, wall);
    const ModeAnalysis ma = analyze_modes(eq, trap, wall);

    // every mode at exactly k_B x 0.1 mK: each branch mean must report it back.
    // The slow branch needs headroom: its large displacements make the
    // quadratic-mode bookkeeping wander by a few percent over an orbit.
    Eigen::VectorXd e = Eigen::VectorXd::Constant(18, consts::k_B * 1e-4);
    std::mt19937_64 rng(31);
    CrystalState s = to_lab_frame(init_modes_with_energies(ma, e, rng), 0.0, wall.omega_r);

    // Small step: the splitting error projects onto the slow branch as an
    // O((omega_c dt)^2) energy wobble, ~9% at dt = 1 ns but ~1% here.
    IntegratorConfig cfg;
    cfg.dt = 0.25e-9;
    cfg.record_stride = 800;
    Trajectory traj;
    evolve(s, trap, sched, cfg, 5e-5, nullptr, nullptr, &traj);

    const BranchEnergySeries series = branch_energies(traj, ma);
    REQUIRE(series.times.size() == traj.times.size());

    const BranchSummary sum = branch_summary(series, 0.0, 1.0);
    CHECK(sum.samples == static_cast<int>(series.times.size()));
    const double want = consts::k_B * 1e-4;
    CHECK(sum.exb == Approx(want).epsilon(0.04));
    CHECK(sum.drumhead == Approx(want).epsilon(0.02));
    CHECK(sum.cyclotron == Approx(want).epsilon(0.02));
    CHECK(sum.exb_no_com == Approx(want).epsilon(0.06));

    // windowing picks the requested frames only
    const BranchSummary head = branch_summary(series, -1.0, 1e-5);
    CHECK(head.samples < sum.samples);
    CHECK(head.samples > 0);
}

TEST_CASE("drumhead spectrum peaks at the axial mode frequencies") {
    const WallSchedule sched =
        WallSchedule::constant_wall(consts::two_pi * 200e3, AlphaPolicy::fixed_alpha, 0.5);
    const WallParams wall = wall_at(sched, trap, 0.0);
    const EquilibriumConfig eq = find_equilibrium(3, trap, wall);
    const ModeAnalysis ma = analyze_modes(eq, trap, wall);

    // excite the three drumhead modes only
    Eigen::VectorXd e = Eigen::VectorXd::Zero(9);
    for (int k : ma.spectrum.indices(ModeBranch::drumhead)) e[k] = consts::k_B * 1e-3;
    std::mt19937_64 rng(8);
    CrystalState s = to_lab_frame(init_modes_with_energies(ma, e, rng), 0.0, wall.omega_r);

    IntegratorConfig cfg;
    cfg.dt = 1e-9;
    cfg.record_stride = 50;  // 20 MHz sampling, axial modes near 1.58 MHz
    Trajectory traj;
    evolve(s, trap, sched, cfg, 4e-4, nullptr, nullptr, &traj);

    const PsdResult psd = drumhead_psd(traj);
    const std::vector<int> peaks = psd_peaks(psd, 1e-2);
    const std::vector<int> drum = ma.spectrum.indices(ModeBranch::drumhead);
    REQUIRE(peaks.size() >= 2);  // two may merge if closer than the resolution

    // every detected peak must sit on a predicted drumhead frequency
    for (int p : peaks) {
        double best = 1e12;
        for (int k : drum)
            best = std::min(best,
                            std::abs(psd.freq[p] - ma.spectrum.frequencies[k] / consts::two_pi));
        CHECK(best < 2.0 * psd.df);
    }
    // and the highest mode (the COM at omega_z) is among them
    double top = 0.0;
    for (int p : peaks) top = std::max(top, psd.freq[p]);
    CHECK(top == Approx(trap.omega_z / consts::two_pi).epsilon(2e-3));
}
