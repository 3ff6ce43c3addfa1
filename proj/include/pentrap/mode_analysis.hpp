#pragma once
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pentrap/equilibrium.hpp"
#include "pentrap/guiding_center.hpp"
#include "pentrap/potential.hpp"
#include "pentrap/state.hpp"

namespace pentrap {

enum class ModeBranch { exb, drumhead, cyclotron };

inline const char* branch_name(ModeBranch b) {
    switch (b) {
        case ModeBranch::exb: return "exb";
        case ModeBranch::drumhead: return "drumhead";
        case ModeBranch::cyclotron: return "cyclotron";
    }
    return "?";
}

struct SingleIonFrequencies {
    double slow;   // magnetron-like in-plane mode [rad/s]
    double fast;   // modified-cyclotron in-plane mode [rad/s]
    double axial;  // [rad/s]
};

// In-plane single-ion eigenfrequencies in the rotating frame, from
//   lambda^4 + (a + b + Omega^2) lambda^2 + a b = 0,
// a = wz^2 (beta + delta), b = wz^2 (beta - delta), Omega = wc - 2 wr.
inline SingleIonFrequencies single_ion_planar_frequencies(const TrapConfig& trap,
                                                          const WallParams& wall) {
    require_confining(trap, wall);
    const double wz2 = trap.omega_z * trap.omega_z;
    const double beta = wall.beta(trap);
    const double a = wz2 * (beta + wall.delta);
    const double b = wz2 * (beta - wall.delta);
    const double om = trap.omega_c() - 2.0 * wall.omega_r;
    const double s = a + b + om * om;
    const double disc = std::sqrt(std::max(s * s - 4.0 * a * b, 0.0));
    return {std::sqrt(0.5 * (s - disc)), std::sqrt(0.5 * (s + disc)), trap.omega_z};
}

// Frequency separating the slow in-plane branch from the fast one: the
// geometric mean of the single-ion slow/fast frequencies,
// wz (beta^2 - delta^2)^(1/4).
inline double branch_split_frequency(const TrapConfig& trap, const WallParams& wall) {
    const double beta = wall.beta(trap);
    return trap.omega_z * std::pow(beta * beta - wall.delta * wall.delta, 0.25);
}

// Linear map between velocity-space coordinates (dq, dv) and canonical
// coordinates (dq, dp), all nondimensionalized: lengths by l0, velocities by
// l0 wz, momenta by m l0 wz.  p_x = v_x + c y, p_y = v_y - c x with
// c = (wc - 2 wr)/(2 wz).
struct CanonicalTransform {
    int n = 0;
    double c_scaled = 0.0;    // (wc - 2 wr) / (2 wz)
    double c_physical = 0.0;  // m (wc - 2 wr) / 2  [kg/s]
    Eigen::MatrixXd t;        // z_c = t z_v
    Eigen::MatrixXd t_inv;
};

inline CanonicalTransform canonical_transform(int n, const TrapConfig& trap,
                                              const WallParams& wall) {
    CanonicalTransform ct;
    ct.n = n;
    const double om = trap.omega_c() - 2.0 * wall.omega_r;
    ct.c_physical = 0.5 * trap.ion.mass * om;
    ct.c_scaled = 0.5 * om / trap.omega_z;
    const int d = 3 * n;
    ct.t = Eigen::MatrixXd::Identity(2 * d, 2 * d);
    ct.t_inv = Eigen::MatrixXd::Identity(2 * d, 2 * d);
    for (int i = 0; i < n; ++i) {
        ct.t(d + i, n + i) = ct.c_scaled;
        ct.t(d + n + i, i) = -ct.c_scaled;
        ct.t_inv(d + i, n + i) = -ct.c_scaled;
        ct.t_inv(d + n + i, i) = ct.c_scaled;
    }
    return ct;
}

// Quadratic Hamiltonian matrix in scaled canonical coordinates:
// H = T^-T blockdiag(K/(m wz^2), I) T^-1.  Energy unit is m wz^2 l0^2.
inline Eigen::MatrixXd canonical_hamiltonian(const EquilibriumConfig& eq, const TrapConfig& trap,
                                             const WallParams& wall) {
    const int d = static_cast<int>(eq.pos.size());
    const int n = d / 3;
    const double mwz2 = trap.ion.mass * trap.omega_z * trap.omega_z;
    Eigen::MatrixXd e = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    e.topLeftCorner(d, d) = hessian_rotating(eq.pos, trap, wall) / mwz2;
    e.bottomRightCorner(d, d).setIdentity();
    const CanonicalTransform ct = canonical_transform(n, trap, wall);
    return ct.t_inv.transpose() * e * ct.t_inv;
}

struct ModeSpectrum {
    int n = 0;
    Eigen::VectorXd frequencies;       // rad/s, ascending (3N)
    std::vector<ModeBranch> branches;  // per mode
    std::vector<bool> com;             // centre-of-mass flag
    Eigen::VectorXd axial_weight;      // energy fraction in z motion
    Eigen::VectorXd com_weight;        // energy fraction in uniform motion
    // y = to_normal * (dq/l0; dv/(l0 wz)); mode k owns (y_2k, y_2k+1) and
    // E_k = (1/2)(y_2k^2 + y_2k+1^2) * energy_unit.
    Eigen::MatrixXd to_normal;
    Eigen::MatrixXd from_normal;
    double length_unit = 0.0;    // l0 [m]
    double velocity_unit = 0.0;  // l0 wz [m/s]
    double energy_unit = 0.0;    // m wz^2 l0^2 [J]

    int count(ModeBranch b) const {
        int c = 0;
        for (ModeBranch x : branches) c += (x == b);
        return c;
    }
    std::vector<int> indices(ModeBranch b) const {
        std::vector<int> idx;
        for (int k = 0; k < n * 3; ++k)
            if (branches[k] == b) idx.push_back(k);
        return idx;
    }
};

struct ModeAnalysis {
    TrapConfig trap;
    WallParams wall;
    EquilibriumConfig eq;
    CharacteristicScales scales{};
    CanonicalTransform transform;
    Eigen::MatrixXd hamiltonian;  // scaled, 6N x 6N
    ModeSpectrum spectrum;
};

// Normal modes of the linearized dynamics about an equilibrium, via the
// Williamson construction: S = H^(1/2), K = S J S (antisymmetric), real Schur
// K = W T W^T whose 2x2 blocks carry the mode frequencies.  The normal
// coordinates Y = W^T S z_c advance by plane rotations at those frequencies,
// so (1/2)(y1^2 + y2^2) is each mode's conserved energy.
inline ModeAnalysis analyze_modes(const EquilibriumConfig& eq, const TrapConfig& trap,
                                  const WallParams& wall) {
    ModeAnalysis ma;
    ma.trap = trap;
    ma.wall = wall;
    ma.eq = eq;
    const int d = static_cast<int>(eq.pos.size());
    const int n = d / 3;
    ma.scales = characteristic_scales(trap, wall.beta(trap));
    ma.transform = canonical_transform(n, trap, wall);
    ma.hamiltonian = canonical_hamiltonian(eq, trap, wall);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ma.hamiltonian);
    const double ev_min = es.eigenvalues().minCoeff();
    const double ev_max = es.eigenvalues().maxCoeff();
    if (ev_min <= 1e-12 * ev_max)
        throw InstabilityError(ev_min, "quadratic Hamiltonian is not positive definite "
                                       "(scaled eigenvalue " +
                                           std::to_string(ev_min) + "); unstable equilibrium");
    const Eigen::VectorXd sq = es.eigenvalues().cwiseSqrt();
    const Eigen::MatrixXd s =
        es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::MatrixXd s_inv =
        es.eigenvectors() * sq.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();

    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    j.topRightCorner(d, d).setIdentity();
    j.bottomLeftCorner(d, d) = -Eigen::MatrixXd::Identity(d, d);

    const Eigen::MatrixXd k = s * j * s;
    Eigen::RealSchur<Eigen::MatrixXd> schur(k);
    const Eigen::MatrixXd& w = schur.matrixU();
    const Eigen::MatrixXd& t = schur.matrixT();

    struct Block {
        double omega;  // scaled, > 0
        int col;
        bool swap;
    };
    std::vector<Block> blocks;
    blocks.reserve(d);
    for (int i = 0; i < 2 * d;) {
        if (i + 1 < 2 * d && t(i + 1, i) != 0.0) {
            const double om = 0.5 * (t(i, i + 1) - t(i + 1, i));
            blocks.push_back({std::abs(om), i, om < 0.0});
            i += 2;
        } else {
            throw InstabilityError(t(i, i),
                                   "zero-frequency normal mode; equilibrium is degenerate");
        }
    }
    std::sort(blocks.begin(), blocks.end(),
              [](const Block& a, const Block& b) { return a.omega < b.omega; });

    // Reorder the Schur basis mode-by-mode so that within a block
    // w1^T K w2 = +omega (consistent handedness for all modes).
    Eigen::MatrixXd ws(2 * d, 2 * d);
    ModeSpectrum& sp = ma.spectrum;
    sp.n = n;
    sp.frequencies.resize(d);
    for (int m = 0; m < d; ++m) {
        int c1 = blocks[m].col, c2 = blocks[m].col + 1;
        if (blocks[m].swap) std::swap(c1, c2);
        ws.col(2 * m) = w.col(c1);
        ws.col(2 * m + 1) = w.col(c2);
        sp.frequencies[m] = blocks[m].omega * trap.omega_z;
    }

    sp.length_unit = ma.scales.l0;
    sp.velocity_unit = ma.scales.l0 * trap.omega_z;
    sp.energy_unit = ma.scales.e0;
    sp.to_normal = ws.transpose() * s * ma.transform.t;
    sp.from_normal = ma.transform.t_inv * s_inv * ws;

    // Energy-weighted composition of each mode: average over the mode's
    // phase of the quadratic energy restricted to a coordinate family.
    auto quad = [&](const Eigen::VectorXd& v) { return v.dot(ma.hamiltonian * v); };
    auto zero_outside_axial = [&](Eigen::VectorXd v) {
        v.segment(0, 2 * n).setZero();          // x, y
        v.segment(d, 2 * n).setZero();          // px, py
        return v;
    };
    auto project_uniform = [&](Eigen::VectorXd v) {
        for (int f = 0; f < 6; ++f) v.segment(f * n, n).setConstant(v.segment(f * n, n).mean());
        return v;
    };

    sp.axial_weight.resize(d);
    sp.com_weight.resize(d);
    sp.branches.resize(d);
    sp.com.resize(d);
    const double split = branch_split_frequency(trap, wall);
    for (int m = 0; m < d; ++m) {
        const Eigen::VectorXd u1 = s_inv * ws.col(2 * m);
        const Eigen::VectorXd u2 = s_inv * ws.col(2 * m + 1);
        sp.axial_weight[m] = 0.5 * (quad(zero_outside_axial(u1)) + quad(zero_outside_axial(u2)));
        sp.com_weight[m] = 0.5 * (quad(project_uniform(u1)) + quad(project_uniform(u2)));
        if (sp.axial_weight[m] > 0.5)
            sp.branches[m] = ModeBranch::drumhead;
        else
            sp.branches[m] = sp.frequencies[m] < split ? ModeBranch::exb : ModeBranch::cyclotron;
        sp.com[m] = sp.com_weight[m] > 0.99;
    }
    return ma;
}

// Normal coordinates of a rotating-frame state relative to the analyzed
// equilibrium.
inline Eigen::VectorXd normal_coordinates(const ModeAnalysis& ma, const CrystalState& state) {
    if (state.frame != Frame::rotating)
        throw Error("normal_coordinates: state must be in the rotating frame");
    const int d = static_cast<int>(ma.eq.pos.size());
    if (state.pos.size() != d) throw Error("normal_coordinates: ion count mismatch");
    Eigen::VectorXd zv(2 * d);
    zv.head(d) = (state.pos - ma.eq.pos) / ma.spectrum.length_unit;
    zv.tail(d) = state.vel / ma.spectrum.velocity_unit;
    return ma.spectrum.to_normal * zv;
}

struct ModeEnergyReport {
    Eigen::VectorXd energies;        // [J], per mode, spectrum order
    double rms_displacement = 0.0;   // per-ion rms displacement / l0
    bool beyond_linear = false;      // rms displacement > 0.3 l0
};

inline ModeEnergyReport project_mode_energies(const ModeAnalysis& ma, const CrystalState& state) {
    const Eigen::VectorXd y = normal_coordinates(ma, state);
    const int d = static_cast<int>(ma.eq.pos.size());
    ModeEnergyReport rep;
    rep.energies.resize(d);
    for (int m = 0; m < d; ++m)
        rep.energies[m] =
            0.5 * (y[2 * m] * y[2 * m] + y[2 * m + 1] * y[2 * m + 1]) * ma.spectrum.energy_unit;
    rep.rms_displacement =
        std::sqrt((state.pos - ma.eq.pos).squaredNorm() / (d / 3)) / ma.spectrum.length_unit;
    rep.beyond_linear = rep.rms_displacement > 0.3;
    return rep;
}

// Rotating-frame state realizing the given normal coordinates.
inline CrystalState state_from_normal(const ModeAnalysis& ma, const Eigen::VectorXd& y,
                                      double time = 0.0) {
    const int d = static_cast<int>(ma.eq.pos.size());
    if (y.size() != 2 * d) throw Error("state_from_normal: coordinate size mismatch");
    const Eigen::VectorXd zv = ma.spectrum.from_normal * y;
    CrystalState st;
    st.frame = Frame::rotating;
    st.time = time;
    st.pos = ma.eq.pos + ma.spectrum.length_unit * zv.head(d);
    st.vel = ma.spectrum.velocity_unit * zv.tail(d);
    return st;
}

// Adiabatic invariant E/omega: energy after a slow frequency change.
inline double adiabatic_energy_prediction(double e_initial, double omega_initial,
                                          double omega_final) {
    return e_initial * omega_final / omega_initial;
}

// In-plane stiffness block (x rows/cols then y) of a full 3N Hessian, for
// the drift-limit eigenproblem.
inline Eigen::MatrixXd planar_stiffness_block(const Eigen::MatrixXd& hess, int n) {
    Eigen::MatrixXd k(2 * n, 2 * n);
    k.topLeftCorner(n, n) = hess.topLeftCorner(n, n);
    k.topRightCorner(n, n) = hess.block(0, n, n, n);
    k.bottomLeftCorner(n, n) = hess.block(n, 0, n, n);
    k.bottomRightCorner(n, n) = hess.block(n, n, n, n);
    return k;
}

} // namespace pentrap
