#pragma once
#include <Eigen/Dense>

#include "pentrap/trap.hpp"

namespace pentrap {

enum class Frame { lab, rotating };

// N-ion phase space point. Coordinates are stacked blockwise:
// (x_1..x_N, y_1..y_N, z_1..z_N), same for velocities. SI units.
struct CrystalState {
    Eigen::VectorXd pos;  // 3N [m]
    Eigen::VectorXd vel;  // 3N [m/s]
    double time = 0.0;    // [s]
    Frame frame = Frame::lab;

    int n() const { return static_cast<int>(pos.size()) / 3; }

    double x(int i) const { return pos[i]; }
    double y(int i) const { return pos[n() + i]; }
    double z(int i) const { return pos[2 * n() + i]; }

    static CrystalState zero(int n, Frame f = Frame::lab) {
        return {Eigen::VectorXd::Zero(3 * n), Eigen::VectorXd::Zero(3 * n), 0.0, f};
    }
};

// Counterclockwise rotation of the planar blocks by angle: (x,y) -> R(angle)(x,y).
inline void rotate_planar_blocks(Eigen::VectorXd& v, int n, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    for (int i = 0; i < n; ++i) {
        const double vx = v[i], vy = v[n + i];
        v[i] = c * vx - s * vy;
        v[n + i] = s * vx + c * vy;
    }
}

// Lab -> frame co-rotating at omega_r (angle theta_r at this instant):
//   r_rot = R(-theta_r) r_lab
//   v_rot = R(-theta_r) v_lab - omega_r zhat x r_rot
inline CrystalState to_rotating_frame(const CrystalState& lab, double theta_r, double omega_r) {
    const int n = lab.n();
    CrystalState out = lab;
    out.frame = Frame::rotating;
    rotate_planar_blocks(out.pos, n, -theta_r);
    rotate_planar_blocks(out.vel, n, -theta_r);
    for (int i = 0; i < n; ++i) {
        out.vel[i] += omega_r * out.pos[n + i];      // -wr * (zhat x r)_x = +wr*y
        out.vel[n + i] -= omega_r * out.pos[i];      // -wr * (zhat x r)_y = -wr*x
    }
    return out;
}

// Inverse of to_rotating_frame.
inline CrystalState to_lab_frame(const CrystalState& rot, double theta_r, double omega_r) {
    const int n = rot.n();
    CrystalState out = rot;
    out.frame = Frame::lab;
    for (int i = 0; i < n; ++i) {
        out.vel[i] -= omega_r * out.pos[n + i];
        out.vel[n + i] += omega_r * out.pos[i];
    }
    rotate_planar_blocks(out.pos, n, theta_r);
    rotate_planar_blocks(out.vel, n, theta_r);
    return out;
}

} // namespace pentrap
