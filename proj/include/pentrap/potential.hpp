#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "pentrap/state.hpp"

namespace pentrap {

// Hard-core guard: pair separations below this are treated as a coincidence.
inline constexpr double coincidence_guard = 1e-10;  // [m]

inline void check_coincidence(const Eigen::VectorXd& pos, int n) {
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double dx = pos[i] - pos[j];
            const double dy = pos[n + i] - pos[n + j];
            const double dz = pos[2 * n + i] - pos[2 * n + j];
            if (dx * dx + dy * dy + dz * dz < coincidence_guard * coincidence_guard)
                throw CoincidenceError(i, j, "coincident ions " + std::to_string(i) + " and " +
                                                 std::to_string(j));
        }
}

// Rotating-frame potential of the crystal:
//   U = sum_{i<j} ke q^2 / r_ij
//     + sum_i (m wz^2/2) [ z^2 + (beta+delta) x^2 + (beta-delta) y^2 ]
inline double potential_energy_rotating(const Eigen::VectorXd& pos, const TrapConfig& trap,
                                        const WallParams& wall) {
    const int n = static_cast<int>(pos.size()) / 3;
    check_coincidence(pos, n);
    const double kq2 = consts::k_e * trap.ion.charge * trap.ion.charge;
    const double beta = wall.beta(trap);
    const double half_mwz2 = 0.5 * trap.ion.mass * trap.omega_z * trap.omega_z;

    double coul = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double dx = pos[i] - pos[j];
            const double dy = pos[n + i] - pos[n + j];
            const double dz = pos[2 * n + i] - pos[2 * n + j];
            coul += kq2 / std::sqrt(dx * dx + dy * dy + dz * dz);
        }

    double quad = 0.0;
    const double cx = beta + wall.delta, cy = beta - wall.delta;
    for (int i = 0; i < n; ++i) {
        quad += cx * pos[i] * pos[i];
        quad += cy * pos[n + i] * pos[n + i];
        quad += pos[2 * n + i] * pos[2 * n + i];
    }
    return coul + half_mwz2 * quad;
}

// Gradient dU/dq of the rotating-frame potential, same 3N layout as pos.
inline Eigen::VectorXd gradient_rotating(const Eigen::VectorXd& pos, const TrapConfig& trap,
                                         const WallParams& wall) {
    const int n = static_cast<int>(pos.size()) / 3;
    check_coincidence(pos, n);
    const double kq2 = consts::k_e * trap.ion.charge * trap.ion.charge;
    const double beta = wall.beta(trap);
    const double mwz2 = trap.ion.mass * trap.omega_z * trap.omega_z;

    Eigen::VectorXd g = Eigen::VectorXd::Zero(3 * n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double dx = pos[i] - pos[j];
            const double dy = pos[n + i] - pos[n + j];
            const double dz = pos[2 * n + i] - pos[2 * n + j];
            const double r2 = dx * dx + dy * dy + dz * dz;
            const double inv_r3 = kq2 / (r2 * std::sqrt(r2));
            // d/dr_i of ke q^2/|r_i - r_j| = -ke q^2 (r_i - r_j)/r^3
            g[i] -= inv_r3 * dx;
            g[j] += inv_r3 * dx;
            g[n + i] -= inv_r3 * dy;
            g[n + j] += inv_r3 * dy;
            g[2 * n + i] -= inv_r3 * dz;
            g[2 * n + j] += inv_r3 * dz;
        }
    const double cx = beta + wall.delta, cy = beta - wall.delta;
    for (int i = 0; i < n; ++i) {
        g[i] += mwz2 * cx * pos[i];
        g[n + i] += mwz2 * cy * pos[n + i];
        g[2 * n + i] += mwz2 * pos[2 * n + i];
    }
    return g;
}

// Analytic Hessian d2U/dq2, 3N x 3N in the blockwise layout.
inline Eigen::MatrixXd hessian_rotating(const Eigen::VectorXd& pos, const TrapConfig& trap,
                                        const WallParams& wall) {
    const int n = static_cast<int>(pos.size()) / 3;
    check_coincidence(pos, n);
    const double kq2 = consts::k_e * trap.ion.charge * trap.ion.charge;
    const double beta = wall.beta(trap);
    const double mwz2 = trap.ion.mass * trap.omega_z * trap.omega_z;

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d[3] = {pos[i] - pos[j], pos[n + i] - pos[n + j],
                                 pos[2 * n + i] - pos[2 * n + j]};
            const double r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            const double inv_r3 = kq2 / (r2 * std::sqrt(r2));
            // pair block: ke q^2 (3 dhat dhat^T - I)/r^3
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) {
                    const double blk = inv_r3 * (3.0 * d[a] * d[b] / r2 - (a == b ? 1.0 : 0.0));
                    h(a * n + i, b * n + i) += blk;
                    h(a * n + j, b * n + j) += blk;
                    h(a * n + i, b * n + j) -= blk;
                    h(a * n + j, b * n + i) -= blk;
                }
        }
    const double cx = beta + wall.delta, cy = beta - wall.delta;
    for (int i = 0; i < n; ++i) {
        h(i, i) += mwz2 * cx;
        h(n + i, n + i) += mwz2 * cy;
        h(2 * n + i, 2 * n + i) += mwz2;
    }
    return h;
}

} // namespace pentrap
