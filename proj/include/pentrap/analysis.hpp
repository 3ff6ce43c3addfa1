#pragma once
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pentrap/integrator.hpp"
#include "pentrap/mode_analysis.hpp"

namespace pentrap {

// Per-branch mean mode energy [J] versus time, from projecting recorded
// frames onto a fixed mode basis.
struct BranchEnergySeries {
    std::vector<double> times;
    std::vector<double> exb, drumhead, cyclotron;  // mean energy per mode [J]
    std::vector<double> exb_no_com;                // slow branch without COM modes
    std::vector<double> rms_displacement;          // per-ion rms / l0
};

namespace detail {

inline std::vector<double> trailing_mean(const std::vector<double>& t,
                                         const std::vector<double>& v, double window) {
    if (window <= 0.0) return v;
    std::vector<double> out(v.size());
    std::size_t lo = 0;
    double acc = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        acc += v[k];
        while (t[lo] < t[k] - window) acc -= v[lo++];
        out[k] = acc / static_cast<double>(k - lo + 1);
    }
    return out;
}

} // namespace detail

// Projects every recorded frame in [t_from, t_to] onto the given mode basis.
// The basis is fixed, so use windows where the wall parameters match the
// analysis. `smoothing_window` (seconds) applies a trailing mean.
inline BranchEnergySeries branch_energies(const Trajectory& traj, const ModeAnalysis& ma,
                                          double t_from = -std::numeric_limits<double>::infinity(),
                                          double t_to = std::numeric_limits<double>::infinity(),
                                          double smoothing_window = 0.0) {
    BranchEnergySeries s;
    const int d = static_cast<int>(ma.eq.pos.size());
    const auto& sp = ma.spectrum;
    int n_exb = 0, n_drum = 0, n_cyc = 0, n_exb_rel = 0;
    for (int m = 0; m < d; ++m) {
        switch (sp.branches[m]) {
            case ModeBranch::exb:
                ++n_exb;
                if (!sp.com[m]) ++n_exb_rel;
                break;
            case ModeBranch::drumhead: ++n_drum; break;
            case ModeBranch::cyclotron: ++n_cyc; break;
        }
    }

    for (int k = 0; k < traj.frames(); ++k) {
        const double t = traj.times[k];
        if (t < t_from || t > t_to) continue;
        const double wr = omega_r_at(traj.schedule, t);
        const CrystalState rot =
            to_rotating_frame(traj.frame_state(k), theta_r_at(traj.schedule, t), wr);
        const ModeEnergyReport rep = project_mode_energies(ma, rot);
        double e_exb = 0, e_drum = 0, e_cyc = 0, e_exb_rel = 0;
        for (int m = 0; m < d; ++m) {
            switch (sp.branches[m]) {
                case ModeBranch::exb:
                    e_exb += rep.energies[m];
                    if (!sp.com[m]) e_exb_rel += rep.energies[m];
                    break;
                case ModeBranch::drumhead: e_drum += rep.energies[m]; break;
                case ModeBranch::cyclotron: e_cyc += rep.energies[m]; break;
            }
        }
        s.times.push_back(t);
        s.exb.push_back(n_exb ? e_exb / n_exb : 0.0);
        s.drumhead.push_back(n_drum ? e_drum / n_drum : 0.0);
        s.cyclotron.push_back(n_cyc ? e_cyc / n_cyc : 0.0);
        s.exb_no_com.push_back(n_exb_rel ? e_exb_rel / n_exb_rel : 0.0);
        s.rms_displacement.push_back(rep.rms_displacement);
    }
    if (smoothing_window > 0.0) {
        s.exb = detail::trailing_mean(s.times, s.exb, smoothing_window);
        s.drumhead = detail::trailing_mean(s.times, s.drumhead, smoothing_window);
        s.cyclotron = detail::trailing_mean(s.times, s.cyclotron, smoothing_window);
        s.exb_no_com = detail::trailing_mean(s.times, s.exb_no_com, smoothing_window);
    }
    return s;
}

struct BranchSummary {
    double exb = 0, drumhead = 0, cyclotron = 0, exb_no_com = 0;  // [J]
    int samples = 0;
};

// Time average of the branch energies over [t_from, t_to].
inline BranchSummary branch_summary(const BranchEnergySeries& s, double t_from, double t_to) {
    BranchSummary out;
    for (std::size_t k = 0; k < s.times.size(); ++k) {
        if (s.times[k] < t_from || s.times[k] > t_to) continue;
        out.exb += s.exb[k];
        out.drumhead += s.drumhead[k];
        out.cyclotron += s.cyclotron[k];
        out.exb_no_com += s.exb_no_com[k];
        ++out.samples;
    }
    if (out.samples) {
        out.exb /= out.samples;
        out.drumhead /= out.samples;
        out.cyclotron /= out.samples;
        out.exb_no_com /= out.samples;
    }
    return out;
}

struct PsdResult {
    std::vector<double> freq;   // [Hz], k / (M dt)
    std::vector<double> power;  // one-sided; sums to the signal variance
    double df = 0.0;            // frequency resolution [Hz]
};

// One-sided periodogram of a uniformly sampled series (mean removed):
// P_k = 2 |X_k|^2 / M^2 for interior bins, so sum_k P_k equals the
// time-domain variance.
inline PsdResult power_spectrum(const std::vector<double>& x, double dt) {
    const int m = static_cast<int>(x.size());
    if (m < 2) throw Error("power_spectrum: series too short");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= m;

    double* in = fftw_alloc_real(m);
    fftw_complex* out = fftw_alloc_complex(m / 2 + 1);
    for (int i = 0; i < m; ++i) in[i] = x[i] - mean;
    fftw_plan plan = fftw_plan_dft_r2c_1d(m, in, out, FFTW_ESTIMATE);
    fftw_execute(plan);

    PsdResult r;
    const int nb = m / 2 + 1;
    r.df = 1.0 / (m * dt);
    r.freq.resize(nb);
    r.power.resize(nb);
    const double norm = 1.0 / (static_cast<double>(m) * m);
    for (int k = 0; k < nb; ++k) {
        r.freq[k] = k * r.df;
        const double p = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) * norm;
        const bool interior = k > 0 && !(m % 2 == 0 && k == m / 2);
        r.power[k] = interior ? 2.0 * p : p;
    }
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
    return r;
}

// Axial-motion spectrum summed over ions.  z is frame-invariant, so lab
// records feed it directly; peaks sit at the drumhead mode frequencies.
inline PsdResult drumhead_psd(const Trajectory& traj,
                              double t_from = -std::numeric_limits<double>::infinity(),
                              double t_to = std::numeric_limits<double>::infinity()) {
    std::vector<int> keep;
    for (int k = 0; k < traj.frames(); ++k)
        if (traj.times[k] >= t_from && traj.times[k] <= t_to) keep.push_back(k);
    if (keep.size() < 2) throw Error("drumhead_psd: not enough frames in window");
    const int n = static_cast<int>(traj.pos[0].size()) / 3;
    const double dt_rec = traj.times[keep[1]] - traj.times[keep[0]];

    PsdResult total;
    std::vector<double> z(keep.size());
    for (int i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < keep.size(); ++k) z[k] = traj.pos[keep[k]][2 * n + i];
        PsdResult one = power_spectrum(z, dt_rec);
        if (total.power.empty()) {
            total = one;
        } else {
            for (std::size_t k = 0; k < total.power.size(); ++k) total.power[k] += one.power[k];
        }
    }
    return total;
}

// Local maxima above `floor_fraction` of the global maximum, as bin indices.
inline std::vector<int> psd_peaks(const PsdResult& psd, double floor_fraction = 1e-3) {
    double pmax = 0.0;
    for (double p : psd.power) pmax = std::max(pmax, p);
    std::vector<int> peaks;
    for (std::size_t k = 1; k + 1 < psd.power.size(); ++k)
        if (psd.power[k] > psd.power[k - 1] && psd.power[k] >= psd.power[k + 1] &&
            psd.power[k] > floor_fraction * pmax)
            peaks.push_back(static_cast<int>(k));
    return peaks;
}

struct EnsembleStats {
    std::vector<double> mean, min, max, stddev;
};

// Pointwise statistics across ensemble members (rows = members, equal length).
inline EnsembleStats ensemble_reduce(const std::vector<std::vector<double>>& members) {
    EnsembleStats st;
    if (members.empty()) return st;
    const std::size_t len = members[0].size();
    for (const auto& m : members)
        if (m.size() != len) throw Error("ensemble_reduce: ragged member series");
    st.mean.assign(len, 0.0);
    st.min.assign(len, std::numeric_limits<double>::infinity());
    st.max.assign(len, -std::numeric_limits<double>::infinity());
    st.stddev.assign(len, 0.0);
    for (const auto& m : members) {
        for (std::size_t k = 0; k < len; ++k) {
            st.mean[k] += m[k];
            st.min[k] = std::min(st.min[k], m[k]);
            st.max[k] = std::max(st.max[k], m[k]);
        }
    }
    const double nm = static_cast<double>(members.size());
    for (std::size_t k = 0; k < len; ++k) st.mean[k] /= nm;
    for (const auto& m : members)
        for (std::size_t k = 0; k < len; ++k) {
            const double dv = m[k] - st.mean[k];
            st.stddev[k] += dv * dv;
        }
    for (std::size_t k = 0; k < len; ++k)
        st.stddev[k] = members.size() > 1 ? std::sqrt(st.stddev[k] / (nm - 1.0)) : 0.0;
    return st;
}

} // namespace pentrap
