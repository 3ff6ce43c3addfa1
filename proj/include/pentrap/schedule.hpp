#pragma once
#include <cmath>

#include "pentrap/trap.hpp"

namespace pentrap {

enum class RampKind { constant, linear, half_cosine };
enum class AlphaPolicy { fixed_delta, fixed_alpha };

// Time-dependent rotating-wall program. omega_r ramps from omega_i to
// omega_f over ramp_time; the wall strength either keeps delta fixed or
// keeps alpha = delta/beta fixed as beta(omega_r) changes.
//
// Ramp laws on t in [0, T]:
//   linear:      omega_r(t) = wi + (wf - wi) t/T
//   half_cosine: omega_r(t) = (wi+wf)/2 + (wi-wf)/2 cos(pi t/T)
// For t > T the wall continues at omega_f; the accumulated angle continues
// as theta(T) + wf (t - T).
struct WallSchedule {
    RampKind kind = RampKind::constant;
    double omega_i = 0.0;      // [rad/s]
    double omega_f = 0.0;      // [rad/s]
    double ramp_time = 0.0;    // [s]
    AlphaPolicy policy = AlphaPolicy::fixed_alpha;
    double strength = 0.0;     // delta (fixed_delta) or alpha (fixed_alpha)

    static WallSchedule constant_wall(double omega_r, AlphaPolicy p, double strength) {
        return {RampKind::constant, omega_r, omega_r, 0.0, p, strength};
    }
};

inline double omega_r_at(const WallSchedule& s, double t) {
    if (s.kind == RampKind::constant) return s.omega_i;
    if (t <= 0.0) return s.omega_i;
    if (t >= s.ramp_time) return s.omega_f;
    const double u = t / s.ramp_time;
    if (s.kind == RampKind::linear) return s.omega_i + (s.omega_f - s.omega_i) * u;
    return 0.5 * (s.omega_i + s.omega_f) + 0.5 * (s.omega_i - s.omega_f) * std::cos(consts::pi * u);
}

// Accumulated rotation angle theta_r(t) = integral of omega_r.
inline double theta_r_at(const WallSchedule& s, double t) {
    if (s.kind == RampKind::constant) return s.omega_i * t;
    if (t <= 0.0) return s.omega_i * t;
    const double T = s.ramp_time;
    auto ramp_angle = [&](double tau) {
        if (s.kind == RampKind::linear)
            return s.omega_i * tau + 0.5 * (s.omega_f - s.omega_i) * tau * tau / T;
        return 0.5 * (s.omega_i + s.omega_f) * tau +
               0.5 * (s.omega_i - s.omega_f) * (T / consts::pi) * std::sin(consts::pi * tau / T);
    };
    if (t <= T) return ramp_angle(t);
    return ramp_angle(T) + s.omega_f * (t - T);
}

inline double delta_at(const WallSchedule& s, const TrapConfig& trap, double t) {
    if (s.policy == AlphaPolicy::fixed_delta) return s.strength;
    return s.strength * compute_beta(trap, omega_r_at(s, t));
}

inline WallParams wall_at(const WallSchedule& s, const TrapConfig& trap, double t) {
    return {omega_r_at(s, t), delta_at(s, trap, t)};
}

} // namespace pentrap
