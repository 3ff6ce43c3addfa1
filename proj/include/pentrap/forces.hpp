#pragma once
#include <Eigen/Dense>
#include <cmath>

#include "pentrap/potential.hpp"

namespace pentrap {

// Precomputed per-run force coefficients (lab frame).
struct ForceContext {
    double kq2_over_m;   // ke q^2 / m
    double half_wz2;     // wz^2 / 2
    double wz2;          // wz^2
    double omega_c;      // |q| B / m

    explicit ForceContext(const TrapConfig& trap)
        : kq2_over_m(consts::k_e * trap.ion.charge * trap.ion.charge / trap.ion.mass),
          half_wz2(0.5 * trap.omega_z * trap.omega_z),
          wz2(trap.omega_z * trap.omega_z),
          omega_c(trap.omega_c()) {}
};

// Electric part of the lab-frame acceleration (Coulomb + static quadrupole +
// rotating wall at angle theta_r), excluding the magnetic term. acc must be
// sized 3n. The wall quadrupole is
//   U_w = (m wz^2 delta / 2) [ (x^2 - y^2) cos 2theta_r + 2 x y sin 2theta_r ].
inline void accel_electric_lab(const double* pos, int n, const ForceContext& fc, double delta,
                               double theta_r, double* acc) {
    const double* px = pos;
    const double* py = pos + n;
    const double* pz = pos + 2 * n;
    double* ax = acc;
    double* ay = acc + n;
    double* az = acc + 2 * n;

    const double c2 = std::cos(2.0 * theta_r), s2 = std::sin(2.0 * theta_r);
    const double wx = fc.wz2 * delta;
    for (int i = 0; i < n; ++i) {
        ax[i] = fc.half_wz2 * px[i] - wx * (px[i] * c2 + py[i] * s2);
        ay[i] = fc.half_wz2 * py[i] + wx * (py[i] * c2 - px[i] * s2);
        az[i] = -fc.wz2 * pz[i];
    }
    for (int i = 0; i < n; ++i) {
        const double xi = px[i], yi = py[i], zi = pz[i];
        double fx = 0.0, fy = 0.0, fz = 0.0;
        for (int j = i + 1; j < n; ++j) {
            const double dx = xi - px[j];
            const double dy = yi - py[j];
            const double dz = zi - pz[j];
            const double r2 = dx * dx + dy * dy + dz * dz;
            const double w = fc.kq2_over_m / (r2 * std::sqrt(r2));
            const double gx = w * dx, gy = w * dy, gz = w * dz;
            fx += gx;
            fy += gy;
            fz += gz;
            ax[j] -= gx;
            ay[j] -= gy;
            az[j] -= gz;
        }
        ax[i] += fx;
        ay[i] += fy;
        az[i] += fz;
    }
}

// Full lab-frame force (per-ion, Newtons): electric part plus q v x B with
// B = -B zhat, i.e. the magnetic acceleration is omega_c (-vy, vx, 0).
inline Eigen::VectorXd force_lab(const CrystalState& state, const TrapConfig& trap, double delta,
                                 double theta_r) {
    const int n = state.n();
    check_coincidence(state.pos, n);
    const ForceContext fc(trap);
    Eigen::VectorXd acc(3 * n);
    accel_electric_lab(state.pos.data(), n, fc, delta, theta_r, acc.data());
    for (int i = 0; i < n; ++i) {
        acc[i] += -fc.omega_c * state.vel[n + i];
        acc[n + i] += fc.omega_c * state.vel[i];
    }
    return trap.ion.mass * acc;
}

// Rotating-frame force (per-ion, Newtons) for a frame co-rotating at omega_r:
// -grad U_rot plus the combined Coriolis/magnetic term m (wc - 2wr) zhat x v.
inline Eigen::VectorXd force_rotating(const CrystalState& state, const TrapConfig& trap,
                                      const WallParams& wall) {
    const int n = state.n();
    Eigen::VectorXd f = -gradient_rotating(state.pos, trap, wall);
    const double mo = trap.ion.mass * (trap.omega_c() - 2.0 * wall.omega_r);
    for (int i = 0; i < n; ++i) {
        f[i] += -mo * state.vel[n + i];
        f[n + i] += mo * state.vel[i];
    }
    return f;
}

} // namespace pentrap
