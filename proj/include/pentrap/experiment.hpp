#pragma once
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pentrap/analysis.hpp"
#include "pentrap/equilibrium.hpp"
#include "pentrap/thermal_sampling.hpp"
#include "pentrap/trajectory_io.hpp"

namespace pentrap {

// Sub-seed derivation for ensemble members (splitmix64 finalizer).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t member_seed(std::uint64_t base, int member) {
    return splitmix64(base + 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(member + 1));
}

struct PhaseConfig {
    std::string name = "phase";
    double duration = 0.0;  // [s]
    bool ramp = false;      // wall ramp starts at the beginning of this phase
    bool record = true;
    bool axial_cooling = false;
    bool planar_cooling = false;
};

struct CoolingOverrides {
    double axial_saturation = 5e-3;
    double axial_detuning_hz = -9e6;  // Delta / 2 pi
    double planar_saturation = 1.0;
    double planar_detuning_hz = -40e6;
    double planar_waist_um = 30.0;
    // negative: bright side on ions co-moving with the beam (see BeamConfig)
    double planar_offset_um = -20.0;
    std::string emission = "isotropic";
};

// All frequencies are ordinary frequencies in Hz (converted to angular
// internally); all durations in seconds.
struct ExperimentConfig {
    int schema_version = 1;
    std::string name = "experiment";
    int n_ions = 0;
    double b_field_t = 4.4588;
    double omega_z_hz = 1.58e6;
    double omega_r_initial_hz = 200e3;
    double omega_r_final_hz = 200e3;
    std::string ramp_kind = "constant";  // constant | linear | half_cosine
    double ramp_time_s = 0.0;
    std::string wall_policy = "fixed_alpha";  // fixed_delta | fixed_alpha
    double wall_strength = 0.5;
    std::string init = "equilibrium";  // equilibrium | modes | metropolis | file
    double init_temperature_mk = 0.0;
    std::string init_file;  // pattern with {} for the member number
    double dt_s = 1e-9;
    int record_stride = 250;
    int members = 1;
    std::uint64_t seed = 20260819ull;
    int ramp_checkpoints = 0;  // extra mode bases along the ramp for the series
    bool write_trajectories = false;
    double measure_window_s = 1e-3;    // per-mode averaging window at both ends
    double smoothing_window_s = 0.0;   // trailing mean on branch series
    bool psd = false;
    double psd_from_s = 0.0, psd_to_s = 0.0;
    double catalog_tolerance = 1e-4;
    CoolingOverrides cooling;
    std::vector<PhaseConfig> phases;
};

namespace detail {

inline void require(bool ok, const std::string& field, const std::string& why) {
    if (!ok) throw ValidationError(field, "config field '" + field + "': " + why);
}

} // namespace detail

inline void validate(const ExperimentConfig& c) {
    using detail::require;
    require(c.schema_version == 1, "schema_version", "must be 1");
    require(!c.name.empty(), "name", "must be non-empty");
    require(c.n_ions >= 1, "n_ions", "must be >= 1");
    require(c.b_field_t > 0, "b_field_t", "must be positive");
    require(c.omega_z_hz > 0, "omega_z_hz", "must be positive");
    require(c.omega_r_initial_hz > 0, "omega_r_initial_hz", "must be positive");
    require(c.omega_r_final_hz > 0, "omega_r_final_hz", "must be positive");
    require(c.ramp_kind == "constant" || c.ramp_kind == "linear" ||
                c.ramp_kind == "half_cosine",
            "ramp_kind", "must be constant | linear | half_cosine");
    require(c.wall_policy == "fixed_delta" || c.wall_policy == "fixed_alpha", "wall_policy",
            "must be fixed_delta | fixed_alpha");
    require(c.wall_strength >= 0, "wall_strength", "must be >= 0");
    if (c.wall_policy == "fixed_alpha")
        require(c.wall_strength < 1.0, "wall_strength", "alpha must be < 1");
    require(c.ramp_time_s >= 0, "ramp_time_s", "must be >= 0");
    require(c.init == "equilibrium" || c.init == "modes" || c.init == "metropolis" ||
                c.init == "file",
            "init", "must be equilibrium | modes | metropolis | file");
    if (c.init == "modes" || c.init == "metropolis")
        require(c.init_temperature_mk > 0, "init_temperature_mk", "must be positive");
    if (c.init == "file") require(!c.init_file.empty(), "init_file", "must be set");
    require(c.dt_s > 0, "dt_s", "must be positive");
    require(c.record_stride >= 1, "record_stride", "must be >= 1");
    require(c.members >= 1, "members", "must be >= 1");
    require(c.ramp_checkpoints >= 0, "ramp_checkpoints", "must be >= 0");
    require(c.measure_window_s > 0, "measure_window_s", "must be positive");
    require(c.smoothing_window_s >= 0, "smoothing_window_s", "must be >= 0");
    require(c.catalog_tolerance > 0, "catalog_tolerance", "must be positive");
    require(c.cooling.emission == "isotropic" || c.cooling.emission == "dipole_sigma" ||
                c.cooling.emission == "along_beam",
            "cooling.emission", "must be isotropic | dipole_sigma | along_beam");
    require(!c.phases.empty(), "phases", "must list at least one phase");
    int ramps = 0;
    for (const auto& p : c.phases) {
        require(p.duration > 0, "phases.duration_s", "must be positive");
        ramps += p.ramp;
    }
    if (c.ramp_kind != "constant") {
        require(c.ramp_time_s > 0, "ramp_time_s", "must be positive for a ramp");
        require(ramps == 1, "phases.ramp", "exactly one phase must carry the ramp");
    } else {
        require(ramps == 0, "phases.ramp", "constant schedule cannot carry a ramp phase");
    }
    if (c.psd) require(c.psd_to_s > c.psd_from_s, "psd_to_s", "empty PSD window");
}

inline void to_json(nlohmann::json& j, const PhaseConfig& p) {
    j = {{"name", p.name},           {"duration_s", p.duration},
         {"ramp", p.ramp},           {"record", p.record},
         {"axial_cooling", p.axial_cooling}, {"planar_cooling", p.planar_cooling}};
}

inline void from_json(const nlohmann::json& j, PhaseConfig& p) {
    p.name = j.value("name", p.name);
    p.duration = j.value("duration_s", p.duration);
    p.ramp = j.value("ramp", p.ramp);
    p.record = j.value("record", p.record);
    p.axial_cooling = j.value("axial_cooling", p.axial_cooling);
    p.planar_cooling = j.value("planar_cooling", p.planar_cooling);
}

inline void to_json(nlohmann::json& j, const CoolingOverrides& c) {
    j = {{"axial_saturation", c.axial_saturation},
         {"axial_detuning_hz", c.axial_detuning_hz},
         {"planar_saturation", c.planar_saturation},
         {"planar_detuning_hz", c.planar_detuning_hz},
         {"planar_waist_um", c.planar_waist_um},
         {"planar_offset_um", c.planar_offset_um},
         {"emission", c.emission}};
}

inline void from_json(const nlohmann::json& j, CoolingOverrides& c) {
    c.axial_saturation = j.value("axial_saturation", c.axial_saturation);
    c.axial_detuning_hz = j.value("axial_detuning_hz", c.axial_detuning_hz);
    c.planar_saturation = j.value("planar_saturation", c.planar_saturation);
    c.planar_detuning_hz = j.value("planar_detuning_hz", c.planar_detuning_hz);
    c.planar_waist_um = j.value("planar_waist_um", c.planar_waist_um);
    c.planar_offset_um = j.value("planar_offset_um", c.planar_offset_um);
    c.emission = j.value("emission", c.emission);
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = {{"schema_version", c.schema_version},
         {"name", c.name},
         {"n_ions", c.n_ions},
         {"b_field_t", c.b_field_t},
         {"omega_z_hz", c.omega_z_hz},
         {"omega_r_initial_hz", c.omega_r_initial_hz},
         {"omega_r_final_hz", c.omega_r_final_hz},
         {"ramp_kind", c.ramp_kind},
         {"ramp_time_s", c.ramp_time_s},
         {"wall_policy", c.wall_policy},
         {"wall_strength", c.wall_strength},
         {"init", c.init},
         {"init_temperature_mk", c.init_temperature_mk},
         {"init_file", c.init_file},
         {"dt_s", c.dt_s},
         {"record_stride", c.record_stride},
         {"members", c.members},
         {"seed", c.seed},
         {"ramp_checkpoints", c.ramp_checkpoints},
         {"write_trajectories", c.write_trajectories},
         {"measure_window_s", c.measure_window_s},
         {"smoothing_window_s", c.smoothing_window_s},
         {"psd", c.psd},
         {"psd_from_s", c.psd_from_s},
         {"psd_to_s", c.psd_to_s},
         {"catalog_tolerance", c.catalog_tolerance},
         {"cooling", c.cooling},
         {"phases", c.phases}};
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
    c.schema_version = j.value("schema_version", c.schema_version);
    c.name = j.value("name", c.name);
    c.n_ions = j.value("n_ions", c.n_ions);
    c.b_field_t = j.value("b_field_t", c.b_field_t);
    c.omega_z_hz = j.value("omega_z_hz", c.omega_z_hz);
    c.omega_r_initial_hz = j.value("omega_r_initial_hz", c.omega_r_initial_hz);
    c.omega_r_final_hz = j.value("omega_r_final_hz", c.omega_r_final_hz);
    c.ramp_kind = j.value("ramp_kind", c.ramp_kind);
    c.ramp_time_s = j.value("ramp_time_s", c.ramp_time_s);
    c.wall_policy = j.value("wall_policy", c.wall_policy);
    c.wall_strength = j.value("wall_strength", c.wall_strength);
    c.init = j.value("init", c.init);
    c.init_temperature_mk = j.value("init_temperature_mk", c.init_temperature_mk);
    c.init_file = j.value("init_file", c.init_file);
    c.dt_s = j.value("dt_s", c.dt_s);
    c.record_stride = j.value("record_stride", c.record_stride);
    c.members = j.value("members", c.members);
    c.seed = j.value("seed", c.seed);
    c.ramp_checkpoints = j.value("ramp_checkpoints", c.ramp_checkpoints);
    c.write_trajectories = j.value("write_trajectories", c.write_trajectories);
    c.measure_window_s = j.value("measure_window_s", c.measure_window_s);
    c.smoothing_window_s = j.value("smoothing_window_s", c.smoothing_window_s);
    c.psd = j.value("psd", c.psd);
    c.psd_from_s = j.value("psd_from_s", c.psd_from_s);
    c.psd_to_s = j.value("psd_to_s", c.psd_to_s);
    c.catalog_tolerance = j.value("catalog_tolerance", c.catalog_tolerance);
    if (j.contains("cooling")) c.cooling = j.at("cooling").get<CoolingOverrides>();
    if (j.contains("phases")) c.phases = j.at("phases").get<std::vector<PhaseConfig>>();
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("load_config: cannot open " + path);
    ExperimentConfig c;
    try {
        nlohmann::json j;
        f >> j;
        c = j.get<ExperimentConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("load_config: " + path + ": " + e.what());
    }
    validate(c);
    return c;
}

inline TrapConfig trap_from(const ExperimentConfig& c) {
    TrapConfig t = default_trap();
    t.b_field = c.b_field_t;
    t.omega_z = consts::two_pi * c.omega_z_hz;
    return t;
}

inline WallSchedule schedule_from(const ExperimentConfig& c) {
    WallSchedule s;
    s.kind = c.ramp_kind == "constant"
                 ? RampKind::constant
                 : (c.ramp_kind == "linear" ? RampKind::linear : RampKind::half_cosine);
    s.omega_i = consts::two_pi * c.omega_r_initial_hz;
    s.omega_f = consts::two_pi * c.omega_r_final_hz;
    s.ramp_time = c.ramp_time_s;
    s.policy = c.wall_policy == "fixed_delta" ? AlphaPolicy::fixed_delta : AlphaPolicy::fixed_alpha;
    s.strength = c.wall_strength;
    return s;
}

inline CoolingConfig cooling_from(const ExperimentConfig& c, bool axial, bool planar) {
    CoolingConfig cc;
    if (c.cooling.emission == "dipole_sigma")
        cc.emission = EmissionPattern::dipole_sigma;
    else if (c.cooling.emission == "along_beam")
        cc.emission = EmissionPattern::along_beam;
    if (axial) {
        BeamConfig b = default_axial_beams();
        b.saturation = c.cooling.axial_saturation;
        b.detuning = consts::two_pi * c.cooling.axial_detuning_hz;
        cc.beams.push_back(b);
    }
    if (planar) {
        BeamConfig b = default_planar_beam();
        b.saturation = c.cooling.planar_saturation;
        b.detuning = consts::two_pi * c.cooling.planar_detuning_hz;
        b.waist = 1e-6 * c.cooling.planar_waist_um;
        b.offset_y = 1e-6 * c.cooling.planar_offset_um;
        cc.beams.push_back(b);
    }
    return cc;
}

struct MemberResult {
    int member = 0;
    std::uint64_t seed = 0;
    BranchEnergySeries series;
    Eigen::VectorXd mode_energies_initial;  // [J], window average; may be empty
    Eigen::VectorXd mode_energies_final;
    int configuration_index = -1;  // catalog entry; -2 when the member failed
    std::string failure;
    CrystalState final_state;  // lab frame
    std::string trajectory_path;
};

struct ExperimentResult {
    ExperimentConfig cfg;
    TrapConfig trap;
    WallSchedule schedule;
    double t_start = 0, t_end = 0;
    double beta_initial = 0, beta_final = 0;
    ModeAnalysis analysis_initial, analysis_final;
    std::vector<MemberResult> members;
    ConfigurationCatalog catalog;
    std::vector<double> psd_freq, psd_power;  // ensemble mean
    // Ensemble means of the recorded energy splits (totals over the crystal).
    std::vector<double> rec_times, ke_par_mean, ke_perp_mean, pe_mean;
};

namespace detail {

inline std::string member_file(const std::string& pattern, int member) {
    std::ostringstream num;
    num << std::setw(3) << std::setfill('0') << member;
    const std::string::size_type at = pattern.find("{}");
    if (at == std::string::npos) throw Error("init_file pattern needs '{}': " + pattern);
    return pattern.substr(0, at) + num.str() + pattern.substr(at + 2);
}

inline Eigen::VectorXd window_mode_average(const Trajectory& traj, const ModeAnalysis& ma,
                                           double t0, double t1) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(ma.eq.pos.size());
    int cnt = 0;
    for (int k = 0; k < traj.frames(); ++k) {
        const double t = traj.times[k];
        if (t < t0 || t > t1) continue;
        const double wr = omega_r_at(traj.schedule, t);
        const CrystalState rot =
            to_rotating_frame(traj.frame_state(k), theta_r_at(traj.schedule, t), wr);
        acc += project_mode_energies(ma, rot).energies;
        ++cnt;
    }
    if (cnt == 0) return Eigen::VectorXd();
    return acc / cnt;
}

inline void append_series(BranchEnergySeries& dst, const BranchEnergySeries& src) {
    dst.times.insert(dst.times.end(), src.times.begin(), src.times.end());
    dst.exb.insert(dst.exb.end(), src.exb.begin(), src.exb.end());
    dst.drumhead.insert(dst.drumhead.end(), src.drumhead.begin(), src.drumhead.end());
    dst.cyclotron.insert(dst.cyclotron.end(), src.cyclotron.begin(), src.cyclotron.end());
    dst.exb_no_com.insert(dst.exb_no_com.end(), src.exb_no_com.begin(), src.exb_no_com.end());
    dst.rms_displacement.insert(dst.rms_displacement.end(), src.rms_displacement.begin(),
                                src.rms_displacement.end());
}

} // namespace detail

// Runs the configured protocol for every ensemble member: initialize, evolve
// through the phases, project branch energies on the pre/post (and optional
// mid-ramp checkpoint) mode bases, relax and classify the final configuration.
// Artifacts are written under out_dir when it is non-empty.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir = "",
                                       std::ostream* log = nullptr) {
    validate(cfg);
    ExperimentResult res;
    res.cfg = cfg;
    res.trap = trap_from(cfg);
    res.schedule = schedule_from(cfg);

    const int n = cfg.n_ions;
    double t_start = 0.0;
    {
        double before = 0.0;
        bool seen_ramp = false;
        for (const auto& p : cfg.phases) {
            if (p.ramp) {
                seen_ramp = true;
                break;
            }
            before += p.duration;
        }
        t_start = seen_ramp ? -before : 0.0;
    }
    double total = 0.0;
    for (const auto& p : cfg.phases) total += p.duration;
    res.t_start = t_start;
    res.t_end = t_start + total;

    const WallParams wall_i = wall_at(res.schedule, res.trap, t_start);
    const WallParams wall_f = wall_at(res.schedule, res.trap, res.t_end);
    res.beta_initial = wall_i.beta(res.trap);
    res.beta_final = wall_f.beta(res.trap);

    if (log) *log << "[" << cfg.name << "] equilibrium at initial wall...\n";
    const EquilibriumConfig eq_i = find_equilibrium(n, res.trap, wall_i);
    res.analysis_initial = analyze_modes(eq_i, res.trap, wall_i);
    const bool same_wall = res.schedule.kind == RampKind::constant;
    // Warm-start chain for ramped walls: seed each equilibrium with the
    // previous one rescaled by cbrt(beta_prev/beta_next). At fixed delta/beta
    // this scaling maps the whole landscape onto itself, so the seed lands on
    // the connected configuration exactly instead of drifting into a
    // neighboring isomer's basin when the ramp is large.
    const auto connected_eq = [&](const EquilibriumConfig& prev, const WallParams& w_prev,
                                  const WallParams& w_next) {
        const double s = std::cbrt(w_prev.beta(res.trap) / w_next.beta(res.trap));
        const Eigen::VectorXd seed = s * prev.pos;
        return find_equilibrium(n, res.trap, w_next, &seed);
    };

    if (same_wall) {
        res.analysis_final = res.analysis_initial;
    } else {
        if (log) *log << "[" << cfg.name << "] equilibrium at final wall...\n";
        res.analysis_final = analyze_modes(connected_eq(eq_i, wall_i, wall_f), res.trap, wall_f);
    }

    // Mid-ramp checkpoint bases for the stitched branch series.
    std::vector<double> ckpt_times;
    std::vector<ModeAnalysis> ckpt;
    if (!same_wall && cfg.ramp_checkpoints > 0) {
        EquilibriumConfig prev = eq_i;
        WallParams w_prev = wall_i;
        for (int c = 1; c <= cfg.ramp_checkpoints; ++c) {
            const double tc = cfg.ramp_time_s * c / (cfg.ramp_checkpoints + 1);
            const WallParams w = wall_at(res.schedule, res.trap, tc);
            prev = connected_eq(prev, w_prev, w);
            w_prev = w;
            ckpt_times.push_back(tc);
            ckpt.push_back(analyze_modes(prev, res.trap, w));
        }
    }

    res.catalog.tol = cfg.catalog_tolerance;
    const double dt_rec = cfg.dt_s * cfg.record_stride;

    IntegratorConfig icfg;
    icfg.dt = cfg.dt_s;
    icfg.record_stride = cfg.record_stride;

    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    int n_rec = 0, n_psd = 0;
    for (int m = 0; m < cfg.members; ++m) {
        MemberResult mr;
        mr.member = m;
        mr.seed = member_seed(cfg.seed, m);
        std::mt19937_64 rng(mr.seed);

        CrystalState state;
        if (cfg.init == "file") {
            // Re-anchor the stored end state on this run's wall angle; the
            // new schedule is expected to start at the old final frequency.
            const Trajectory prev = read_trajectory(detail::member_file(cfg.init_file, m));
            CrystalState rot = to_rotating_frame(
                prev.final_state, theta_r_at(prev.schedule, prev.final_state.time),
                omega_r_at(prev.schedule, prev.final_state.time));
            rot.time = t_start;
            state = to_lab_frame(rot, theta_r_at(res.schedule, t_start),
                                 omega_r_at(res.schedule, t_start));
        } else {
            CrystalState rot;
            if (cfg.init == "equilibrium") {
                rot = CrystalState{eq_i.pos, Eigen::VectorXd::Zero(3 * n), t_start,
                                   Frame::rotating};
            } else if (cfg.init == "modes") {
                rot = init_modes_at_temperature(res.analysis_initial,
                                                1e-3 * cfg.init_temperature_mk, rng, t_start);
            } else {  // metropolis
                rot = metropolis_sample(eq_i.pos, res.trap, wall_i,
                                        1e-3 * cfg.init_temperature_mk, rng);
                rot.time = t_start;
            }
            state = to_lab_frame(rot, theta_r_at(res.schedule, t_start),
                                 omega_r_at(res.schedule, t_start));
        }

        Trajectory traj;
        try {
            for (const auto& ph : cfg.phases) {
                const CoolingConfig cc =
                    cooling_from(cfg, ph.axial_cooling, ph.planar_cooling);
                evolve(state, res.trap, res.schedule, icfg, ph.duration,
                       cc.beams.empty() ? nullptr : &cc, &rng, ph.record ? &traj : nullptr);
            }
        } catch (const Error& e) {
            mr.failure = e.what();
            mr.configuration_index = -2;
            res.members.push_back(std::move(mr));
            if (log) *log << "[" << cfg.name << "] member " << m << " failed: " << e.what() << "\n";
            continue;
        }
        mr.final_state = state;

        // Branch series stitched across bases: initial for t <= 0, checkpoint
        // bases across the ramp, final basis afterwards.
        const double eps = 0.25 * dt_rec;
        if (same_wall) {
            mr.series = branch_energies(traj, res.analysis_initial);
        } else {
            mr.series = branch_energies(traj, res.analysis_initial,
                                        -std::numeric_limits<double>::infinity(), 0.0);
            double lo = 0.0;
            for (std::size_t c = 0; c < ckpt.size(); ++c) {
                const double hi =
                    c + 1 < ckpt.size() ? 0.5 * (ckpt_times[c] + ckpt_times[c + 1])
                                        : cfg.ramp_time_s;
                detail::append_series(mr.series, branch_energies(traj, ckpt[c], lo + eps, hi));
                lo = hi;
            }
            detail::append_series(
                mr.series, branch_energies(traj, res.analysis_final, lo + eps,
                                           std::numeric_limits<double>::infinity()));
        }
        if (cfg.smoothing_window_s > 0) {
            mr.series.exb = detail::trailing_mean(mr.series.times, mr.series.exb,
                                                  cfg.smoothing_window_s);
            mr.series.drumhead = detail::trailing_mean(mr.series.times, mr.series.drumhead,
                                                       cfg.smoothing_window_s);
            mr.series.cyclotron = detail::trailing_mean(mr.series.times, mr.series.cyclotron,
                                                        cfg.smoothing_window_s);
            mr.series.exb_no_com = detail::trailing_mean(mr.series.times, mr.series.exb_no_com,
                                                         cfg.smoothing_window_s);
        }

        const double head1 = same_wall ? t_start + cfg.measure_window_s
                                       : std::min(t_start + cfg.measure_window_s, 0.0);
        mr.mode_energies_initial =
            detail::window_mode_average(traj, res.analysis_initial, t_start, head1);
        const double tail0 = std::max(res.t_end - cfg.measure_window_s,
                                      same_wall ? t_start : cfg.ramp_time_s);
        mr.mode_energies_final =
            detail::window_mode_average(traj, res.analysis_final, tail0, res.t_end);

        if (traj.frames() > 0) {
            if (res.rec_times.empty()) {
                res.rec_times = traj.times;
                res.ke_par_mean.assign(traj.times.size(), 0.0);
                res.ke_perp_mean.assign(traj.times.size(), 0.0);
                res.pe_mean.assign(traj.times.size(), 0.0);
            }
            if (traj.times.size() == res.rec_times.size()) {
                for (std::size_t k = 0; k < res.rec_times.size(); ++k) {
                    res.ke_par_mean[k] += traj.ke_par[k];
                    res.ke_perp_mean[k] += traj.ke_perp[k];
                    res.pe_mean[k] += traj.pe_raw[k];
                }
                ++n_rec;
            }
        }

        if (cfg.psd && traj.frames() > 1) {
            const PsdResult p = drumhead_psd(traj, cfg.psd_from_s, cfg.psd_to_s);
            if (res.psd_power.empty()) {
                res.psd_freq = p.freq;
                res.psd_power = p.power;
            } else {
                for (std::size_t k = 0; k < res.psd_power.size(); ++k)
                    res.psd_power[k] += p.power[k];
            }
            ++n_psd;
        }

        // Relax the end state and classify the configuration.
        try {
            const CrystalState rot_end =
                to_rotating_frame(state, theta_r_at(res.schedule, state.time),
                                  omega_r_at(res.schedule, state.time));
            const EquilibriumConfig relaxed = relax_from_snapshot(rot_end, res.trap, wall_f);
            mr.configuration_index = res.catalog.classify(relaxed);
        } catch (const Error& e) {
            mr.configuration_index = -1;
            mr.failure = std::string("relaxation: ") + e.what();
        }

        if (cfg.write_trajectories && !out_dir.empty()) {
            mr.trajectory_path =
                out_dir + "/" + detail::member_file(cfg.name + "_member_{}.ptrj", m);
            write_trajectory(mr.trajectory_path, traj);
        }
        if (log)
            *log << "[" << cfg.name << "] member " << m << " done (config "
                 << mr.configuration_index << ")\n";
        res.members.push_back(std::move(mr));
    }

    if (!res.psd_power.empty())
        for (double& p : res.psd_power) p /= std::max(n_psd, 1);
    if (!res.rec_times.empty() && n_rec > 0)
        for (std::size_t k = 0; k < res.rec_times.size(); ++k) {
            res.ke_par_mean[k] /= n_rec;
            res.ke_perp_mean[k] /= n_rec;
            res.pe_mean[k] /= n_rec;
        }
    return res;
}

// ---------------------------------------------------------------------------
// Artifact writers

namespace detail {

inline std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open for writing: " + path);
    f << std::setprecision(12);
    return f;
}

} // namespace detail

// Ensemble mean (and spread) of the branch series, one row per record time.
inline void write_branch_csv(const ExperimentResult& res, const std::string& path) {
    std::vector<std::vector<double>> exb, drum, cyc, rel;
    for (const auto& m : res.members) {
        if (!m.failure.empty()) continue;
        exb.push_back(m.series.exb);
        drum.push_back(m.series.drumhead);
        cyc.push_back(m.series.cyclotron);
        rel.push_back(m.series.exb_no_com);
    }
    if (exb.empty()) throw Error("write_branch_csv: no successful members");
    const EnsembleStats se = ensemble_reduce(exb), sd = ensemble_reduce(drum),
                        sc = ensemble_reduce(cyc), sr = ensemble_reduce(rel);
    const std::vector<double>* times = nullptr;
    for (const auto& m : res.members)
        if (m.failure.empty()) {
            times = &m.series.times;
            break;
        }
    std::ofstream f = detail::open_out(path);
    f << "time_s,exb_mK,drumhead_mK,cyclotron_mK,exb_noCOM_mK,exb_min_mK,exb_max_mK\n";
    for (std::size_t k = 0; k < times->size(); ++k)
        f << (*times)[k] << "," << to_millikelvin(se.mean[k]) << "," << to_millikelvin(sd.mean[k])
          << "," << to_millikelvin(sc.mean[k]) << "," << to_millikelvin(sr.mean[k]) << ","
          << to_millikelvin(se.min[k]) << "," << to_millikelvin(se.max[k]) << "\n";
}

// Per-mode table on the final basis: frequency, branch, measured ensemble
// averages, and the adiabatic-invariant prediction from the initial window.
inline void write_mode_csv(const ExperimentResult& res, const std::string& path) {
    const ModeSpectrum& spi = res.analysis_initial.spectrum;
    const ModeSpectrum& spf = res.analysis_final.spectrum;
    const int d = static_cast<int>(spf.frequencies.size());

    Eigen::VectorXd ei = Eigen::VectorXd::Zero(d), ef = Eigen::VectorXd::Zero(d);
    int ni = 0, nf = 0;
    for (const auto& m : res.members) {
        if (!m.failure.empty()) continue;
        if (m.mode_energies_initial.size() == d) {
            ei += m.mode_energies_initial;
            ++ni;
        }
        if (m.mode_energies_final.size() == d) {
            ef += m.mode_energies_final;
            ++nf;
        }
    }
    if (ni) ei /= ni;
    if (nf) ef /= nf;

    // Match modes across the ramp by branch and rank within the branch.
    std::vector<int> match(d, -1);
    for (ModeBranch b : {ModeBranch::exb, ModeBranch::drumhead, ModeBranch::cyclotron}) {
        const std::vector<int> fi = spf.indices(b), ii = spi.indices(b);
        for (std::size_t r = 0; r < fi.size() && r < ii.size(); ++r) match[fi[r]] = ii[r];
    }

    std::ofstream f = detail::open_out(path);
    f << "mode,branch,com,freq_initial_hz,freq_final_hz,energy_initial_mK,energy_final_mK,"
         "adiabatic_prediction_mK\n";
    for (int k = 0; k < d; ++k) {
        const int src = match[k];
        const double fi_hz = src >= 0 ? spi.frequencies[src] / consts::two_pi : 0.0;
        const double pred =
            (src >= 0 && ni)
                ? adiabatic_energy_prediction(ei[src], spi.frequencies[src], spf.frequencies[k])
                : 0.0;
        f << k << "," << branch_name(spf.branches[k]) << "," << (spf.com[k] ? 1 : 0) << ","
          << fi_hz << "," << spf.frequencies[k] / consts::two_pi << ","
          << (src >= 0 && ni ? to_millikelvin(ei[src]) : 0.0) << ","
          << (nf ? to_millikelvin(ef[k]) : 0.0) << "," << to_millikelvin(pred) << "\n";
    }
}

// Recorded kinetic/potential energy splits averaged across members, per ion,
// with the potential measured from the final-wall equilibrium.
inline void write_kinetics_csv(const ExperimentResult& res, const std::string& path) {
    if (res.rec_times.empty()) throw Error("write_kinetics_csv: nothing was recorded");
    const double u0 = res.analysis_final.eq.potential;
    const int n = res.cfg.n_ions;
    std::ofstream f = detail::open_out(path);
    f << "time_s,ke_par_mK,ke_perp_mK,pe_rel_mK\n";
    for (std::size_t k = 0; k < res.rec_times.size(); ++k)
        f << res.rec_times[k] << "," << to_millikelvin(res.ke_par_mean[k] / n) << ","
          << to_millikelvin(res.ke_perp_mean[k] / n) << ","
          << to_millikelvin((res.pe_mean[k] - u0) / n) << "\n";
}

inline void write_psd_csv(const ExperimentResult& res, const std::string& path) {
    if (res.psd_power.empty()) throw Error("write_psd_csv: no PSD was accumulated");
    std::ofstream f = detail::open_out(path);
    f << "freq_hz,power_m2\n";
    for (std::size_t k = 0; k < res.psd_freq.size(); ++k)
        f << res.psd_freq[k] << "," << res.psd_power[k] << "\n";
}

inline void write_catalog_csv(const ExperimentResult& res, const std::string& path) {
    std::ofstream f = detail::open_out(path);
    f << "configuration,count,potential_J,planar\n";
    for (std::size_t k = 0; k < res.catalog.entries.size(); ++k) {
        const auto& e = res.catalog.entries[k];
        f << k << "," << e.count << "," << e.rep.potential << "," << (e.rep.planar ? 1 : 0)
          << "\n";
    }
}

inline void write_manifest(const ExperimentResult& res, const std::string& path) {
    nlohmann::json j;
    j["config"] = res.cfg;
    j["derived"] = {
        {"beta_initial", res.beta_initial},
        {"beta_final", res.beta_final},
        {"l0_initial_m", res.analysis_initial.scales.l0},
        {"l0_final_m", res.analysis_final.scales.l0},
        {"t_start_s", res.t_start},
        {"t_end_s", res.t_end},
        {"exb_modes", res.analysis_final.spectrum.count(ModeBranch::exb)},
        {"drumhead_modes", res.analysis_final.spectrum.count(ModeBranch::drumhead)},
        {"cyclotron_modes", res.analysis_final.spectrum.count(ModeBranch::cyclotron)},
        {"eq_potential_initial_J", res.analysis_initial.eq.potential},
        {"eq_potential_final_J", res.analysis_final.eq.potential},
        {"eq_planar_initial", res.analysis_initial.eq.planar},
        {"eq_planar_final", res.analysis_final.eq.planar},
    };
    nlohmann::json members = nlohmann::json::array();
    for (const auto& m : res.members) {
        nlohmann::json e = {{"member", m.member},
                            {"seed", m.seed},
                            {"configuration", m.configuration_index}};
        if (!m.failure.empty()) e["failure"] = m.failure;
        if (!m.trajectory_path.empty()) e["trajectory"] = m.trajectory_path;
        members.push_back(e);
    }
    j["members"] = members;
    nlohmann::json cat = nlohmann::json::array();
    for (const auto& e : res.catalog.entries)
        cat.push_back({{"count", e.count},
                       {"potential_J", e.rep.potential},
                       {"planar", e.rep.planar},
                       {"gradient_norm", e.rep.gradient_norm}});
    j["catalog"] = cat;
    std::ofstream f = detail::open_out(path);
    f << j.dump(2) << "\n";
}

// Writes every applicable artifact for the run into `dir`.
inline void write_artifacts(const ExperimentResult& res, const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_manifest(res, dir + "/manifest.json");
    bool any_ok = false, have_series = false;
    for (const auto& m : res.members) {
        any_ok |= m.failure.empty();
        have_series |= m.failure.empty() && !m.series.times.empty();
    }
    if (have_series) write_branch_csv(res, dir + "/branches.csv");
    if (any_ok) write_mode_csv(res, dir + "/modes.csv");
    if (!res.rec_times.empty()) write_kinetics_csv(res, dir + "/kinetics.csv");
    if (!res.psd_power.empty()) write_psd_csv(res, dir + "/psd.csv");
    if (!res.catalog.entries.empty()) write_catalog_csv(res, dir + "/catalog.csv");
}

// ---------------------------------------------------------------------------
// Canned study configurations

inline std::vector<std::string> preset_names() {
    return {"ramp_compare", "wall_strength_scan", "adiabatic_54", "axial_recool_54",
            "thermal_cloud_180", "thermal_cloud_195"};
}

inline std::vector<ExperimentConfig> preset_configs(const std::string& preset) {
    std::vector<ExperimentConfig> out;
    auto base = [] {
        ExperimentConfig c;
        c.omega_r_initial_hz = 200e3;
        return c;
    };

    if (preset == "ramp_compare") {
        // Three 200 -> 190 kHz ramp protocols on a 50-ion crystal started in
        // equilibrium: linear at fixed delta, linear at fixed delta/beta, and
        // half-cosine at fixed delta/beta.
        for (int proto = 0; proto < 3; ++proto) {
            ExperimentConfig c = base();
            c.n_ions = 50;
            c.omega_r_final_hz = 190e3;
            c.ramp_time_s = 1e-3;
            c.init = "equilibrium";
            c.members = 1;
            c.write_trajectories = true;
            c.ramp_checkpoints = 8;
            c.measure_window_s = 0.5e-3;
            if (proto == 0) {
                c.name = "ramp_linear_fixed_delta";
                c.ramp_kind = "linear";
                c.wall_policy = "fixed_delta";
                // matches delta/beta = 0.5 at the starting frequency
                TrapConfig t = trap_from(c);
                c.wall_strength = 0.5 * compute_beta(t, consts::two_pi * c.omega_r_initial_hz);
            } else {
                c.name = proto == 1 ? "ramp_linear_fixed_alpha" : "ramp_half_cosine";
                c.ramp_kind = proto == 1 ? "linear" : "half_cosine";
                c.wall_policy = "fixed_alpha";
                c.wall_strength = 0.5;
            }
            c.phases = {{"hold", 0.2e-3, false, true, false, false},
                        {"ramp", 1e-3, true, true, false, false},
                        {"settle", 1e-3, false, true, false, false}};
            out.push_back(c);
        }
    } else if (preset == "wall_strength_scan") {
        // Half-cosine 200 -> 180 kHz at delta/beta from 0.1 to 0.5 for
        // several crystal sizes; post-ramp potential energy measures heating.
        for (int n : {20, 30, 40, 50})
            for (double alpha : {0.1, 0.2, 0.3, 0.4, 0.5}) {
                ExperimentConfig c = base();
                std::ostringstream nm;
                nm << "wall_scan_N" << n << "_a" << alpha;
                c.name = nm.str();
                c.n_ions = n;
                c.omega_r_final_hz = 180e3;
                c.ramp_kind = "half_cosine";
                c.ramp_time_s = 1e-3;
                c.wall_policy = "fixed_alpha";
                c.wall_strength = alpha;
                c.init = "equilibrium";
                c.members = 1;
                c.measure_window_s = 1e-3;
                c.phases = {{"ramp", 1e-3, true, true, false, false},
                            {"settle", 1e-3, false, true, false, false}};
                out.push_back(c);
            }
    } else if (preset == "adiabatic_54") {
        // 128-member ensemble of 54-ion crystals, modes at 1 mK, slow
        // half-cosine 200 -> 180 kHz; per-mode energies before and after.
        ExperimentConfig c = base();
        c.name = "adiabatic_54";
        c.n_ions = 54;
        c.omega_r_final_hz = 180e3;
        c.ramp_kind = "half_cosine";
        c.ramp_time_s = 20e-3;
        c.wall_policy = "fixed_alpha";
        c.wall_strength = 1.0 / 3.0;
        c.init = "modes";
        c.init_temperature_mk = 1.0;
        c.members = 128;
        c.measure_window_s = 1e-3;
        c.write_trajectories = true;
        c.phases = {{"hold", 1e-3, false, true, false, false},
                    {"ramp", 20e-3, true, true, false, false},
                    {"settle", 1e-3, false, true, false, false}};
        out.push_back(c);
    } else if (preset == "axial_recool_54") {
        // Continuation of adiabatic_54: 1 ms of axial cooling after the ramp,
        // then 12.5 ms of free evolution for the drumhead spectra.
        ExperimentConfig c = base();
        c.name = "axial_recool_54";
        c.n_ions = 54;
        c.omega_r_initial_hz = 180e3;
        c.omega_r_final_hz = 180e3;
        c.ramp_kind = "constant";
        c.wall_policy = "fixed_alpha";
        c.wall_strength = 1.0 / 3.0;
        c.init = "file";
        c.init_file = "out/adiabatic_54/adiabatic_54_member_{}.ptrj";
        c.members = 128;
        c.measure_window_s = 1e-3;
        c.psd = true;
        c.psd_from_s = 1e-3;
        c.psd_to_s = 13.5e-3;
        c.phases = {{"axial_cooling", 1e-3, false, true, true, false},
                    {"free", 12.5e-3, false, true, false, false}};
        out.push_back(c);
    } else if (preset == "thermal_cloud_180" || preset == "thermal_cloud_195") {
        // 100-ion clouds sampled at 100 mK, laser cooled for 20 ms at a fixed
        // rotation frequency; crystallization statistics from the end states.
        ExperimentConfig c = base();
        const bool hi = preset == "thermal_cloud_195";
        c.name = preset;
        c.n_ions = 100;
        c.omega_r_initial_hz = hi ? 195e3 : 180e3;
        c.omega_r_final_hz = c.omega_r_initial_hz;
        c.ramp_kind = "constant";
        c.wall_policy = "fixed_alpha";
        c.wall_strength = 0.5;
        c.init = "metropolis";
        c.init_temperature_mk = 100.0;
        c.members = 128;
        c.record_stride = 2500;
        c.measure_window_s = 1e-3;
        c.write_trajectories = true;
        c.phases = {{"laser_cooling", 20e-3, false, true, true, true}};
        out.push_back(c);
    } else {
        throw Error("unknown preset: " + preset);
    }
    for (auto& c : out) validate(c);
    return out;
}

} // namespace pentrap
