#pragma once
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "pentrap/guiding_center.hpp"
#include "pentrap/potential.hpp"

namespace pentrap {

struct EquilibriumConfig {
    Eigen::VectorXd pos;       // rotating frame, 3N blockwise
    double potential = 0.0;    // U at the minimum [J]
    double gradient_norm = 0.0;
    bool planar = false;       // max |z| < 1e-6 l0
};

struct ConvergenceError : Error {
    EquilibriumConfig best;
    ConvergenceError(EquilibriumConfig b, const std::string& msg)
        : Error(msg), best(std::move(b)) {}
};

namespace detail {

// Deterministic tie-breaker noise for symmetry breaking (no RNG involved).
inline std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

inline double hash_noise(int i, int salt) {
    std::uint64_t h = 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(i) + 1) +
                      0xBF58476D1CE4E5B9ull * (static_cast<std::uint64_t>(salt) + 1);
    h ^= h >> 30;
    h *= 0xBF58476D1CE4E5B9ull;
    h ^= h >> 27;
    return static_cast<double>(h % 100000) / 50000.0 - 1.0;  // in [-1, 1)
}

// Triangular-lattice disk seed, scaled by l0, with a small deterministic
// out-of-plane perturbation so unstable planar saddles can be escaped.
inline Eigen::VectorXd lattice_seed(int n, double l0) {
    struct P {
        double x, y, r2;
    };
    std::vector<P> pts;
    const double a = 1.45;
    const int m = static_cast<int>(std::ceil(std::sqrt(n) + 3));
    for (int i = -m; i <= m; ++i)
        for (int j = -m; j <= m; ++j) {
            const double x = a * (i + 0.5 * j);
            const double y = a * (std::sqrt(3.0) / 2.0) * j;
            pts.push_back({x, y, x * x + y * y});
        }
    std::sort(pts.begin(), pts.end(), [](const P& u, const P& v) { return u.r2 < v.r2; });
    Eigen::VectorXd q(3 * n);
    for (int i = 0; i < n; ++i) {
        q[i] = pts[i].x * l0 * (1.0 + 1e-4 * hash_noise(i, 1));
        q[n + i] = pts[i].y * l0 * (1.0 + 1e-4 * hash_noise(i, 2));
        q[2 * n + i] = 1e-3 * l0 * hash_noise(i, 3);
    }
    return q;
}

} // namespace detail

// Minimize the rotating-frame potential with a modified-Newton descent:
// the Hessian's eigenvalues are floored in magnitude, the step direction is
// backtracked on the Armijo condition. Converges to
// |grad| < 1e-10 ke q^2/l0^2.
namespace detail {

inline EquilibriumConfig descend_newton(int n, const TrapConfig& trap, const WallParams& wall,
                                        Eigen::VectorXd q) {
    const double beta = wall.beta(trap);
    const CharacteristicScales sc = characteristic_scales(trap, beta);
    const double kq2 = consts::k_e * trap.ion.charge * trap.ion.charge;
    const double gtol = 1e-10 * kq2 / (sc.l0 * sc.l0);

    if (q.size() != 3 * n) throw Error("find_equilibrium: seed size mismatch");

    double u = potential_energy_rotating(q, trap, wall);
    Eigen::VectorXd g = gradient_rotating(q, trap, wall);

    const int max_iter = 500;
    for (int iter = 0; iter < max_iter; ++iter) {
        if (g.norm() < gtol) break;

        Eigen::MatrixXd h = hessian_rotating(q, trap, wall);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
        const Eigen::VectorXd& ev = es.eigenvalues();
        const double floor_ev = std::max(1e-8 * std::abs(ev[3 * n - 1]), 1e-300);
        Eigen::VectorXd inv_ev(3 * n);
        for (int k = 0; k < 3 * n; ++k) inv_ev[k] = 1.0 / std::max(std::abs(ev[k]), floor_ev);
        Eigen::VectorXd step =
            -(es.eigenvectors() * inv_ev.asDiagonal() * (es.eigenvectors().transpose() * g));

        // Endgame: inside the attraction basin (positive definite Hessian,
        // small step) take plain Newton steps judged by the gradient alone.
        // Near the minimum the energy decrease per step drops below the
        // floating-point resolution of U, so a line search on U would stall
        // long before the gradient tolerance is reached.
        const double max_move = step.cwiseAbs().maxCoeff();
        if (ev[0] > 0.0 && max_move < 1e-2 * sc.l0) {
            try {
                const Eigen::VectorXd qt = q + step;
                const Eigen::VectorXd gt = gradient_rotating(qt, trap, wall);
                if (gt.norm() < g.norm()) {
                    q = qt;
                    g = gt;
                    u = potential_energy_rotating(q, trap, wall);
                    continue;
                }
            } catch (const CoincidenceError&) {
            }
        }

        // keep individual moves bounded to a fraction of the crystal scale
        if (max_move > 0.5 * sc.l0) step *= 0.5 * sc.l0 / max_move;

        const double slope = g.dot(step);
        double lambda = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            Eigen::VectorXd qt = q + lambda * step;
            double ut;
            try {
                ut = potential_energy_rotating(qt, trap, wall);
            } catch (const CoincidenceError&) {
                lambda *= 0.5;
                continue;
            }
            if (ut <= u + 1e-4 * lambda * slope || ut < u) {
                q = std::move(qt);
                u = ut;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            // Newton direction failed; fall back to plain gradient descent
            double gl = sc.l0 * 1e-2 / std::max(g.norm(), 1e-300);
            for (int bt = 0; bt < 200 && !accepted; ++bt) {
                Eigen::VectorXd qt = q - gl * g;
                double ut;
                try {
                    ut = potential_energy_rotating(qt, trap, wall);
                } catch (const CoincidenceError&) {
                    gl *= 0.5;
                    continue;
                }
                if (ut < u) {
                    q = std::move(qt);
                    u = ut;
                    accepted = true;
                } else {
                    gl *= 0.5;
                }
            }
        }
        g = gradient_rotating(q, trap, wall);
        if (!accepted && g.norm() >= gtol) {
            EquilibriumConfig best{q, u, g.norm(), false};
            throw ConvergenceError(best, "equilibrium search stalled at |g| = " +
                                             detail::sci(g.norm()));
        }
    }
    if (g.norm() >= gtol) {
        EquilibriumConfig best{q, u, g.norm(), false};
        throw ConvergenceError(best, "equilibrium search did not converge: |g| = " +
                                         detail::sci(g.norm()) + " (tol " +
                                         detail::sci(gtol) + ")");
    }

    EquilibriumConfig out;
    out.pos = std::move(q);
    out.potential = u;
    out.gradient_norm = g.norm();
    double zmax = 0.0;
    for (int i = 0; i < n; ++i) zmax = std::max(zmax, std::abs(out.pos[2 * n + i]));
    out.planar = zmax < 1e-6 * sc.l0;
    return out;
}

} // namespace detail

// With a seed: warm start, descend to the nearest minimum (scans and
// snapshot relaxation rely on this staying local). Without one: the lattice
// seed alone can settle into a metastable isomer a few mK/ion above the
// ground configuration (first seen at N = 20), so basin-search from a set of
// deterministically perturbed copies and keep the lowest minimum.
inline EquilibriumConfig find_equilibrium(int n, const TrapConfig& trap, const WallParams& wall,
                                          const Eigen::VectorXd* seed = nullptr) {
    require_confining(trap, wall);
    if (seed) return detail::descend_newton(n, trap, wall, *seed);

    const CharacteristicScales sc = characteristic_scales(trap, wall.beta(trap));
    const Eigen::VectorXd lattice = detail::lattice_seed(n, sc.l0);

    EquilibriumConfig best;
    bool have_best = false;
    std::string first_error;
    try {
        best = detail::descend_newton(n, trap, wall, lattice);
        have_best = true;
    } catch (const ConvergenceError& e) {
        first_error = e.what();
    }

    const int restarts = (n <= 3) ? 0 : 12;
    std::mt19937_64 prng(0x5EEDBA5Eull ^ static_cast<std::uint64_t>(n));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 0; t < restarts; ++t) {
        const double amp = (0.04 + 0.02 * t) * sc.l0;
        Eigen::VectorXd q = lattice;
        for (Eigen::Index k = 0; k < q.size(); ++k) q[k] += amp * gauss(prng);
        try {
            EquilibriumConfig e = detail::descend_newton(n, trap, wall, std::move(q));
            if (!have_best || e.potential < best.potential) {
                best = std::move(e);
                have_best = true;
            }
        } catch (const ConvergenceError&) {
        }
    }
    if (!have_best)
        throw ConvergenceError(EquilibriumConfig{}, first_error.empty()
                                                        ? "equilibrium search failed from every seed"
                                                        : first_error);
    return best;
}

// Drop velocities, keep rotating-frame positions, descend to the local
// minimum reachable from there.
inline EquilibriumConfig relax_from_snapshot(const CrystalState& rot_state, const TrapConfig& trap,
                                             const WallParams& wall) {
    if (rot_state.frame != Frame::rotating)
        throw Error("relax_from_snapshot: state must be in the rotating frame");
    return find_equilibrium(rot_state.n(), trap, wall, &rot_state.pos);
}

// Two configurations match when their potentials agree to a relative
// tolerance and their sorted pairwise-distance spectra agree elementwise.
inline bool classify_match(const EquilibriumConfig& a, const EquilibriumConfig& b,
                           double tol = 1e-4) {
    if (a.pos.size() != b.pos.size()) return false;
    const double uref = std::max(std::abs(a.potential), std::abs(b.potential));
    if (std::abs(a.potential - b.potential) > tol * uref) return false;

    const int n = static_cast<int>(a.pos.size()) / 3;
    auto spectrum = [n](const Eigen::VectorXd& q) {
        std::vector<double> d;
        d.reserve(n * (n - 1) / 2);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double dx = q[i] - q[j], dy = q[n + i] - q[n + j],
                             dz = q[2 * n + i] - q[2 * n + j];
                d.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
            }
        std::sort(d.begin(), d.end());
        return d;
    };
    const auto da = spectrum(a.pos), db = spectrum(b.pos);
    for (std::size_t k = 0; k < da.size(); ++k)
        if (std::abs(da[k] - db[k]) > tol * std::max(da[k], db[k])) return false;
    return true;
}

// Catalog of distinct configurations, ordered by observation count.
struct ConfigurationCatalog {
    struct Entry {
        EquilibriumConfig rep;
        int count = 0;
    };
    std::vector<Entry> entries;
    double tol = 1e-4;

    // Returns the entry index the configuration was classified into.
    int classify(const EquilibriumConfig& cfg) {
        for (std::size_t k = 0; k < entries.size(); ++k) {
            if (classify_match(entries[k].rep, cfg, tol)) {
                entries[k].count++;
                if (cfg.potential < entries[k].rep.potential) entries[k].rep = cfg;
                stable_resort();
                return locate(entries[k].rep.potential);
            }
        }
        entries.push_back({cfg, 1});
        stable_resort();
        return locate(cfg.potential);
    }

  private:
    void stable_resort() {
        std::stable_sort(entries.begin(), entries.end(),
                         [](const Entry& a, const Entry& b) { return a.count > b.count; });
    }
    int locate(double potential) const {
        for (std::size_t k = 0; k < entries.size(); ++k)
            if (entries[k].rep.potential == potential) return static_cast<int>(k);
        return -1;
    }
};

} // namespace pentrap
