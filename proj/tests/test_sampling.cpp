// Thermal state preparation: Boltzmann statistics of the mode sampler and
// equipartition of the Metropolis position sampler.
#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "pentrap/pentrap.hpp"

using namespace pentrap;
using Catch::Approx;

namespace {
const TrapConfig trap = default_trap();

// Kolmogorov-Smirnov distance against a CDF
template <typename Cdf>
double ks_distance(std::vector<double> x, Cdf cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max(d, std::abs(f - (i + 1) / n));
        d = std::max(d, std::abs(f - i / n));
    }
    return d;
}
} // namespace

TEST_CASE("sampled mode energies follow the Boltzmann distribution") {
    const WallParams wall = wall_from_alpha(trap, consts::two_pi * 200e3, 0.5);
    const ModeAnalysis ma = analyze_modes(find_equilibrium(2, trap, wall), trap, wall);

    const double t_mk = 1e-3;
    std::mt19937_64 rng(42);
    std::vector<double> scaled;
    for (int rep = 0; rep < 1200; ++rep) {
        const CrystalState st = init_modes_at_temperature(ma, t_mk, rng);
        const ModeEnergyReport r = project_mode_energies(ma, st);
        for (double e : r.energies) scaled.push_back(e / (consts::k_B * t_mk));
    }
    REQUIRE(scaled.size() == 7200);

    double mean = 0.0;
    for (double e : scaled) mean += e;
    mean /= scaled.size();
    CHECK(mean == Approx(1.0).epsilon(0.05));

    // KS distance against Exp(1); 0.025 is far beyond the p = 0.001 quantile
    const double d = ks_distance(scaled, [](double x) { return 1.0 - std::exp(-x); });
    CHECK(d < 0.025);
}

TEST_CASE("metropolis samples satisfy equipartition") {
    const WallParams wall = wall_from_alpha(trap, consts::two_pi * 200e3, 0.5);
    const EquilibriumConfig eq = find_equilibrium(4, trap, wall);

    const double t = 1e-3, kt = consts::k_B * t;
    std::mt19937_64 rng(7);
    MetropolisConfig cfg;
    cfg.sweeps = 400;

    double sum_du = 0.0, sum_ke = 0.0, sum_vz2 = 0.0;
    const int reps = 150;
    for (int rep = 0; rep < reps; ++rep) {
        const CrystalState st = metropolis_sample(eq.pos, trap, wall, t, rng, cfg);
        REQUIRE(st.frame == Frame::rotating);
        sum_du += potential_energy_rotating(st.pos, trap, wall) - eq.potential;
        sum_ke += kinetic_parallel(st, trap.ion.mass) + kinetic_perp(st, trap.ion.mass);
        for (int i = 0; i < 4; ++i) sum_vz2 += st.vel[8 + i] * st.vel[8 + i];
    }
    // 12 position and 12 velocity degrees of freedom at kT/2 each
    CHECK(sum_du / reps == Approx(6.0 * kt).epsilon(0.12));
    CHECK(sum_ke / reps == Approx(6.0 * kt).epsilon(0.10));
    CHECK(sum_vz2 / (reps * 4) == Approx(kt / trap.ion.mass).epsilon(0.10));
}

TEST_CASE("metropolis velocity components are gaussian") {
    const WallParams wall = wall_from_alpha(trap, consts::two_pi * 200e3, 0.5);
    const EquilibriumConfig eq = find_equilibrium(2, trap, wall);

    const double t = 5e-3;
    const double sigma_v = std::sqrt(consts::k_B * t / trap.ion.mass);
    std::mt19937_64 rng(3);
    MetropolisConfig cfg;
    cfg.sweeps = 100;

    std::vector<double> v;
    for (int rep = 0; rep < 400; ++rep) {
        const CrystalState st = metropolis_sample(eq.pos, trap, wall, t, rng, cfg);
        for (int k = 0; k < 6; ++k) v.push_back(st.vel[k]);
    }
    const double d = ks_distance(v, [&](double x) {
        return 0.5 * (1.0 + std::erf(x / (sigma_v * std::sqrt(2.0))));
    });
    CHECK(d < 0.04);
}

TEST_CASE("an untunable proposal width raises a tuning error") {
    const WallParams wall = wall_from_alpha(trap, consts::two_pi * 200e3, 0.5);
    const EquilibriumConfig eq = find_equilibrium(3, trap, wall);

    std::mt19937_64 rng(1);
    MetropolisConfig cfg;
    cfg.sweeps = 100;
    cfg.initial_step = 1.0;  // a one-metre proposal width cannot adapt in time
    try {
        metropolis_sample(eq.pos, trap, wall, 1e-3, rng, cfg);
        FAIL("expected TuningError");
    } catch (const TuningError& e) {
        CHECK(e.acceptance < 0.1);
    }
}

TEST_CASE("sampling is reproducible for a fixed seed") {
    const WallParams wall = wall_from_alpha(trap, consts::two_pi * 200e3, 0.5);
    const EquilibriumConfig eq = find_equilibrium(3, trap, wall);
    MetropolisConfig cfg;
    cfg.sweeps = 60;

    std::mt19937_64 ra(1234), rb(1234);
    const CrystalState a = metropolis_sample(eq.pos, trap, wall, 1e-3, ra, cfg);
    const CrystalState b = metropolis_sample(eq.pos, trap, wall, 1e-3, rb, cfg);
    CHECK((a.pos.array() == b.pos.array()).all());
    CHECK((a.vel.array() == b.vel.array()).all());
}
