// Command-line front end: equilibria, mode tables, protocol runs, spectra.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "pentrap/pentrap.hpp"

namespace {

struct WallArgs {
    int n = 20;
    double omega_r_khz = 200.0;
    double alpha = 0.5;
    double delta = -1.0;  // overrides alpha when >= 0
};

void add_wall_args(CLI::App* cmd, WallArgs& w) {
    cmd->add_option("-n,--ions", w.n, "number of ions")->check(CLI::PositiveNumber);
    cmd->add_option("--omega-r-khz", w.omega_r_khz, "rotating wall frequency [kHz]")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--alpha", w.alpha, "wall strength as delta/beta");
    cmd->add_option("--delta", w.delta, "wall strength delta (overrides --alpha)");
}

pentrap::WallParams wall_from_args(const pentrap::TrapConfig& trap, const WallArgs& w) {
    const double omega_r = pentrap::consts::two_pi * 1e3 * w.omega_r_khz;
    if (w.delta >= 0.0) return {omega_r, w.delta};
    return pentrap::wall_from_alpha(trap, omega_r, w.alpha);
}

int cmd_equilibrium(const WallArgs& w, const std::string& out) {
    const pentrap::TrapConfig trap = pentrap::default_trap();
    const pentrap::WallParams wall = wall_from_args(trap, w);
    const double beta = wall.beta(trap);
    const pentrap::CharacteristicScales sc = pentrap::characteristic_scales(trap, beta);
    const pentrap::EquilibriumConfig eq = pentrap::find_equilibrium(w.n, trap, wall);

    std::cout << "N = " << w.n << ", omega_r = " << w.omega_r_khz << " kHz\n"
              << "beta = " << beta << ", delta = " << wall.delta << ", l0 = " << sc.l0 * 1e6
              << " um\n"
              << "U = " << eq.potential << " J, |grad| = " << eq.gradient_norm
              << ", planar = " << (eq.planar ? "yes" : "no") << "\n";
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw pentrap::Error("cannot open " + out);
        f << std::setprecision(12) << "x_um,y_um,z_um\n";
        for (int i = 0; i < w.n; ++i)
            f << eq.pos[i] * 1e6 << "," << eq.pos[w.n + i] * 1e6 << ","
              << eq.pos[2 * w.n + i] * 1e6 << "\n";
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_modes(const WallArgs& w, const std::string& out) {
    const pentrap::TrapConfig trap = pentrap::default_trap();
    const pentrap::WallParams wall = wall_from_args(trap, w);
    const pentrap::EquilibriumConfig eq = pentrap::find_equilibrium(w.n, trap, wall);
    const pentrap::ModeAnalysis ma = pentrap::analyze_modes(eq, trap, wall);
    const auto& sp = ma.spectrum;

    const pentrap::SingleIonFrequencies si = pentrap::single_ion_planar_frequencies(trap, wall);
    std::cout << "modes: " << sp.count(pentrap::ModeBranch::exb) << " ExB, "
              << sp.count(pentrap::ModeBranch::drumhead) << " drumhead, "
              << sp.count(pentrap::ModeBranch::cyclotron) << " cyclotron\n"
              << "single-ion slow/fast: " << si.slow / pentrap::consts::two_pi * 1e-3 << " kHz / "
              << si.fast / pentrap::consts::two_pi * 1e-6 << " MHz\n"
              << "lowest ExB mode: " << sp.frequencies[0] / pentrap::consts::two_pi * 1e-3
              << " kHz\n";
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw pentrap::Error("cannot open " + out);
        f << std::setprecision(12) << "mode,branch,com,freq_hz,axial_weight\n";
        for (int k = 0; k < 3 * w.n; ++k)
            f << k << "," << pentrap::branch_name(sp.branches[k]) << "," << (sp.com[k] ? 1 : 0)
              << "," << sp.frequencies[k] / pentrap::consts::two_pi << "," << sp.axial_weight[k]
              << "\n";
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int run_one(pentrap::ExperimentConfig cfg, const std::string& out_root, bool quiet) {
    const std::string dir = out_root + "/" + cfg.name;
    const pentrap::ExperimentResult res =
        pentrap::run_experiment(cfg, dir, quiet ? nullptr : &std::cerr);
    pentrap::write_artifacts(res, dir);
    int ok = 0;
    for (const auto& m : res.members) ok += m.failure.empty();
    std::cout << cfg.name << ": " << ok << "/" << cfg.members << " members, "
              << res.catalog.entries.size() << " configuration(s), artifacts in " << dir << "\n";
    return ok == 0 ? 1 : 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"planar ion crystal dynamics toolkit"};
    app.require_subcommand(1);

    WallArgs weq, wmo;
    std::string out_eq, out_mo;
    CLI::App* c_eq = app.add_subcommand("equilibrium", "solve crystal equilibrium positions");
    add_wall_args(c_eq, weq);
    c_eq->add_option("-o,--out", out_eq, "positions CSV path");

    CLI::App* c_mo = app.add_subcommand("modes", "normal-mode table at an equilibrium");
    add_wall_args(c_mo, wmo);
    c_mo->add_option("-o,--out", out_mo, "mode table CSV path");

    std::string cfg_path, preset, out_root = "out";
    std::uint64_t seed_override = 0;
    int members_override = 0;
    bool quiet = false;
    CLI::App* c_sim = app.add_subcommand("simulate", "run a protocol from a config or preset");
    c_sim->add_option("-c,--config", cfg_path, "experiment config (JSON)");
    c_sim->add_option("-p,--preset", preset, "preset name (see `presets`)");
    c_sim->add_option("-o,--out", out_root, "output root directory");
    c_sim->add_option("--seed", seed_override, "override the ensemble seed");
    c_sim->add_option("--members", members_override, "override the member count");
    c_sim->add_flag("-q,--quiet", quiet, "suppress progress output");

    std::string traj_path, psd_out = "psd.csv";
    double from_ms = 0.0, to_ms = 0.0;
    CLI::App* c_psd = app.add_subcommand("psd", "axial power spectrum of a saved trajectory");
    c_psd->add_option("-t,--traj", traj_path, "trajectory file (.ptrj)")->required();
    c_psd->add_option("--from-ms", from_ms, "window start [ms]");
    c_psd->add_option("--to-ms", to_ms, "window end [ms] (0 = end of data)");
    c_psd->add_option("-o,--out", psd_out, "output CSV path");

    CLI::App* c_pre = app.add_subcommand("presets", "list canned study configurations");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(c_eq)) return cmd_equilibrium(weq, out_eq);
        if (app.got_subcommand(c_mo)) return cmd_modes(wmo, out_mo);
        if (app.got_subcommand(c_sim)) {
            std::vector<pentrap::ExperimentConfig> cfgs;
            if (!cfg_path.empty())
                cfgs.push_back(pentrap::load_config(cfg_path));
            else if (!preset.empty())
                cfgs = pentrap::preset_configs(preset);
            else
                throw pentrap::Error("simulate needs --config or --preset");
            int rc = 0;
            for (auto& c : cfgs) {
                if (seed_override) c.seed = seed_override;
                if (members_override) c.members = members_override;
                rc |= run_one(c, out_root, quiet);
            }
            return rc;
        }
        if (app.got_subcommand(c_psd)) {
            const pentrap::Trajectory traj = pentrap::read_trajectory(traj_path);
            const double t0 = 1e-3 * from_ms;
            const double t1 = to_ms > 0 ? 1e-3 * to_ms : traj.times.back();
            const pentrap::PsdResult p = pentrap::drumhead_psd(traj, t0, t1);
            std::ofstream f(psd_out);
            if (!f) throw pentrap::Error("cannot open " + psd_out);
            f << std::setprecision(12) << "freq_hz,power_m2\n";
            for (std::size_t k = 0; k < p.freq.size(); ++k)
                f << p.freq[k] << "," << p.power[k] << "\n";
            std::cout << "wrote " << psd_out << " (df = " << p.df << " Hz)\n";
            return 0;
        }
        if (app.got_subcommand(c_pre)) {
            for (const auto& name : pentrap::preset_names()) {
                std::cout << name << "\n";
                for (const auto& c : pentrap::preset_configs(name))
                    std::cout << "  " << c.name << ": N=" << c.n_ions << ", " << c.members
                              << " member(s), " << c.omega_r_initial_hz * 1e-3 << " -> "
                              << c.omega_r_final_hz * 1e-3 << " kHz\n";
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
