#pragma once
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <vector>

#include "pentrap/trap.hpp"

namespace pentrap {

// Natural length and energy of the planar crystal at confinement beta:
//   l0 = (ke q^2 / (beta m wz^2 / 2))^(1/3),  e0 = m wz^2 l0^2.
struct CharacteristicScales {
    double l0;
    double e0;
};

inline CharacteristicScales characteristic_scales(const TrapConfig& trap, double beta) {
    const double kq2 = consts::k_e * trap.ion.charge * trap.ion.charge;
    const double mwz2 = trap.ion.mass * trap.omega_z * trap.omega_z;
    const double l0 = std::cbrt(kq2 / (0.5 * beta * mwz2));
    return {l0, mwz2 * l0 * l0};
}

// E x B drift-limit frequencies: eigenfrequencies of
//   qdot = (1/(m (wc - 2 wr))) J K q,   J = [[0, I], [-I, 0]]
// where K is the 2N x 2N planar stiffness (x block then y block). Returns
// the N frequencies sorted ascending. Throws InstabilityError if the drift
// dynamics is not purely oscillatory.
inline Eigen::VectorXd gc_exb_frequencies(const Eigen::MatrixXd& planar_stiffness,
                                          const TrapConfig& trap, double omega_r) {
    const int twoN = static_cast<int>(planar_stiffness.rows());
    const int n = twoN / 2;
    const double denom = trap.ion.mass * (trap.omega_c() - 2.0 * omega_r);
    if (std::abs(trap.omega_c() - 2.0 * omega_r) < 1e-12 * trap.omega_c())
        throw ConfinementError("guiding-center limit undefined at omega_c = 2 omega_r");

    Eigen::MatrixXd a(twoN, twoN);
    a.topRows(n) = planar_stiffness.bottomRows(n) / denom;
    a.bottomRows(n) = -planar_stiffness.topRows(n) / denom;

    Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
    const auto& ev = es.eigenvalues();
    double scale = 0.0;
    for (int i = 0; i < twoN; ++i) scale = std::max(scale, std::abs(ev[i]));
    std::vector<double> freqs;
    for (int i = 0; i < twoN; ++i) {
        if (std::abs(ev[i].real()) > 1e-6 * scale)
            throw InstabilityError(ev[i].real(),
                                   "guiding-center dynamics unstable: Re(lambda) = " +
                                       std::to_string(ev[i].real()));
        if (ev[i].imag() > 0.0) freqs.push_back(ev[i].imag());
    }
    std::sort(freqs.begin(), freqs.end());
    return Eigen::Map<Eigen::VectorXd>(freqs.data(), static_cast<long>(freqs.size()));
}

// Parameter-free predictions for how the E x B branch rescales when the
// confinement changes from beta_i to beta_f (drift limit).
struct ScalingPredictions {
    double position_factor;       // equilibrium coordinates: (beta_i/beta_f)^(1/3)
    double stiffness_factor;      // planar stiffness matrix: beta_f/beta_i
    double frequency_factor;      // E x B frequencies: beta_f/beta_i
    double displacement_factor;   // thermal displacements at fixed E: (beta_i/beta_f)^(1/2)
    double nonlinearity_factor;   // relative nonlinear coupling: (beta_i/beta_f)^(1/6)
};

inline ScalingPredictions scaling_predictions(double beta_i, double beta_f) {
    const double r = beta_i / beta_f;
    return {std::cbrt(r), 1.0 / r, 1.0 / r, std::sqrt(r), std::pow(r, 1.0 / 6.0)};
}

} // namespace pentrap
