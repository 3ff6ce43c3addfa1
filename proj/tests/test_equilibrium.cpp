// Crystal equilibria: shell structure, the planar-to-buckled transition,
// configuration matching, and relaxation from noisy snapshots.
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "pentrap/pentrap.hpp"

using namespace pentrap;
using Catch::Approx;

namespace {
const TrapConfig trap = default_trap();
double wr_khz(double f) { return consts::two_pi * f * 1e3; }

std::vector<double> radii(const EquilibriumConfig& eq, int n) {
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i)
        r[i] = std::hypot(eq.pos[i], eq.pos[n + i]);
    std::sort(r.begin(), r.end());
    return r;
}
} // namespace

TEST_CASE("seven ions form a centered hexagonal shell under a weak wall") {
    const WallParams wall = wall_from_alpha(trap, wr_khz(200), 0.05);
    const EquilibriumConfig eq = find_equilibrium(7, trap, wall);
    CHECK(eq.planar);
    CHECK(eq.gradient_norm < 1e-9 * consts::k_e * trap.ion.charge * trap.ion.charge /
                                 (1.5e-5 * 1.5e-5));

    const std::vector<double> r = radii(eq, 7);
    CHECK(r[0] < 0.2 * r[1]);                 // one ion at the center
    CHECK(r[6] < 1.15 * r[1]);                // six on a slightly squeezed ring
}

TEST_CASE("a strong wall stretches the crystal along the soft axis") {
    const WallParams wall = wall_from_alpha(trap, wr_khz(200), 0.5);
    const EquilibriumConfig eq = find_equilibrium(7, trap, wall);
    CHECK(eq.planar);
    double xmax = 0.0, ymax = 0.0;
    for (int i = 0; i < 7; ++i) {
        xmax = std::max(xmax, std::abs(eq.pos[i]));
        ymax = std::max(ymax, std::abs(eq.pos[7 + i]));
    }
    CHECK(ymax > 1.4 * xmax);
}

TEST_CASE("equilibria scale with the confinement parameter as beta^(-1/3)") {
    // same alpha at two rotation rates: all coordinates scale by
    // (beta_i/beta_f)^(1/3); pair distances follow
    const WallParams wa = wall_from_alpha(trap, wr_khz(200), 0.5);
    const WallParams wb = wall_from_alpha(trap, wr_khz(180), 0.5);
    const EquilibriumConfig ea = find_equilibrium(10, trap, wa);
    const EquilibriumConfig eb = find_equilibrium(10, trap, wb);

    const double factor = std::cbrt(wa.beta(trap) / wb.beta(trap));
    CHECK(factor == Approx(1.3853472338219304).epsilon(1e-12));

    const std::vector<double> ra = radii(ea, 10), rb = radii(eb, 10);
    for (int k = 0; k < 10; ++k)
        CHECK(rb[k] == Approx(factor * ra[k]).epsilon(1e-6));
}

TEST_CASE("54 ions: planar at 200 kHz, buckled past the transition") {
    const double alpha = 1.0 / 3.0;
    const EquilibriumConfig low =
        find_equilibrium(54, trap, wall_from_alpha(trap, wr_khz(200), alpha));
    CHECK(low.planar);

    const EquilibriumConfig high =
        find_equilibrium(54, trap, wall_from_alpha(trap, wr_khz(206), alpha));
    CHECK_FALSE(high.planar);
    // the buckled crystal pushes ions well off the plane
    double zmax = 0.0;
    for (int i = 0; i < 54; ++i) zmax = std::max(zmax, std::abs(high.pos[108 + i]));
    CHECK(zmax > 1e-7);
}

TEST_CASE("configuration matching folds symmetry copies") {
    const WallParams wall = wall_from_alpha(trap, wr_khz(200), 0.5);
    const EquilibriumConfig eq = find_equilibrium(9, trap, wall);

    // the wall potential has a two-fold symmetry: (x, y) -> (-x, -y)
    EquilibriumConfig flipped = eq;
    for (int k = 0; k < 18; ++k) flipped.pos[k] = -flipped.pos[k];
    CHECK(classify_match(eq, flipped));

    // a dilated copy is a different configuration
    EquilibriumConfig scaled = eq;
    scaled.pos *= 1.2;
    scaled.potential = potential_energy_rotating(scaled.pos, trap, wall);
    CHECK_FALSE(classify_match(eq, scaled));

    // so is the same ion count at a different wall
    const EquilibriumConfig other =
        find_equilibrium(9, trap, wall_from_alpha(trap, wr_khz(180), 0.5));
    CHECK_FALSE(classify_match(eq, other));
}

TEST_CASE("the catalog counts distinct configurations") {
    const WallParams wall = wall_from_alpha(trap, wr_khz(200), 0.5);
    const EquilibriumConfig eq = find_equilibrium(8, trap, wall);
    EquilibriumConfig flipped = eq;
    for (int k = 0; k < 16; ++k) flipped.pos[k] = -flipped.pos[k];
    EquilibriumConfig scaled = eq;
    scaled.pos *= 1.3;
    scaled.potential = potential_energy_rotating(scaled.pos, trap, wall);

    ConfigurationCatalog cat;
    CHECK(cat.classify(eq) == 0);
    CHECK(cat.classify(flipped) == 0);
    CHECK(cat.classify(scaled) == 1);
    CHECK(cat.classify(eq) == 0);
    REQUIRE(cat.entries.size() == 2);
    CHECK(cat.entries[0].count == 3);
    CHECK(cat.entries[1].count == 1);
}

TEST_CASE("relaxing a noisy snapshot recovers the configuration") {
    const WallParams wall = wall_from_alpha(trap, wr_khz(200), 0.5);
    const EquilibriumConfig eq = find_equilibrium(12, trap, wall);

    CrystalState rot{eq.pos, Eigen::VectorXd::Zero(36), 0.0, Frame::rotating};
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 3e-7);
    for (int k = 0; k < 36; ++k) rot.pos[k] += noise(rng);
    rot.vel.setConstant(0.2);

    const EquilibriumConfig back = relax_from_snapshot(rot, trap, wall);
    CHECK(classify_match(eq, back));
    CHECK(back.potential == Approx(eq.potential).epsilon(1e-10));

    CrystalState lab = rot;
    lab.frame = Frame::lab;
    CHECK_THROWS_AS(relax_from_snapshot(lab, trap, wall), Error);
}

TEST_CASE("warm starts converge to the tracked branch") {
    // at fixed alpha a planar equilibrium rescales exactly with beta^(-1/3),
    // so warm-starting from a nearby wall must reproduce the scaled shape
    const WallParams wa = wall_from_alpha(trap, wr_khz(200), 0.5);
    const WallParams wb = wall_from_alpha(trap, wr_khz(195), 0.5);
    const EquilibriumConfig ea = find_equilibrium(15, trap, wa);
    const EquilibriumConfig warm = find_equilibrium(15, trap, wb, &ea.pos);
    CHECK(warm.gradient_norm < 1e-12);
    CHECK(warm.planar);

    const double factor = std::cbrt(wa.beta(trap) / wb.beta(trap));
    const std::vector<double> ra = radii(ea, 15), rw = radii(warm, 15);
    for (int k = 0; k < 15; ++k)
        CHECK(rw[k] == Approx(factor * ra[k]).epsilon(1e-6));
}
