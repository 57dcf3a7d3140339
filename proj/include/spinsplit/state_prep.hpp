#pragma once

#include <cmath>

#include "spinsplit/dicke.hpp"
#include "spinsplit/errors.hpp"
#include "spinsplit/rotation.hpp"

namespace spinsplit {

// Variance of the counting quadrature after tilting the state by `tilt` about
// the mean-spin axis x: v(t) = Var(Sz) cos^2 t + Var(Sy) sin^2 t + Cov sin 2t.
inline double tilted_z_variance(const SpinMoments& m, double tilt) {
    const double c = std::cos(tilt);
    const double s = std::sin(tilt);
    return m.cov[2][2] * c * c + m.cov[1][1] * s * s + 2.0 * m.cov[1][2] * s * c;
}

// Tilt about x that minimizes the counting-quadrature variance.
inline double optimal_tilt(const SpinMoments& m) {
    const double t = 0.5 * std::atan2(2.0 * m.cov[1][2], m.cov[2][2] - m.cov[1][1]);
    const double other = t + 0.5 * kPi;
    return tilted_z_variance(m, t) <= tilted_z_variance(m, other) ? t : other;
}

/// Squeezed-state preparation: equatorial coherent state, one-axis twisting,
/// re-centering of the mean spin on +x, then a tilt about x that brings the
/// chosen quadrature onto the counting axis z.
inline DickeState squeezed_state(int n_atoms, double mu, double tilt) {
    DickeState state = one_axis_twist(coherent_state(n_atoms, 0.5 * kPi, 0.0), mu);
    const SpinMoments m = spin_moments(state);
    const double azimuth = std::atan2(m.mean[1], m.mean[0]);
    if (azimuth != 0.0) state = rotate_z(state, -azimuth);
    if (tilt != 0.0) state = rotate(state, {1.0, 0.0, 0.0}, tilt);
    return state;
}

struct SqueezingSolution {
    double mu = 0.0;
    double tilt = 0.0;       // rad, about the mean-spin axis
    double achieved_db = 0.0;
};

// Wineland parameter of the tilt-optimized twisted state, in dB. The twist
// also advances the mean-spin azimuth, so the state is re-centered on +x
// before the (y,z)-plane tilt search.
inline double best_squeezing_db(int n_atoms, double mu, double* tilt_out = nullptr) {
    DickeState state = one_axis_twist(coherent_state(n_atoms, 0.5 * kPi, 0.0), mu);
    const SpinMoments m0 = spin_moments(state);
    state = rotate_z(state, -std::atan2(m0.mean[1], m0.mean[0]));
    const SpinMoments m = spin_moments(state);
    const double tilt = optimal_tilt(m);
    if (tilt_out) *tilt_out = tilt;
    const double var_min = tilted_z_variance(m, tilt);
    const double pol = m.polarization();
    require(pol > 0.0, ErrorCategory::domain, "best_squeezing_db: zero polarization");
    const double xi2 = n_atoms * var_min / (pol * pol);
    return 10.0 * std::log10(xi2);
}

/// Finds the twisting strength whose optimally tilted state reaches the target
/// Wineland squeezing (dB, negative = squeezed), on the weak-twisting side of
/// the optimum. Deterministic bisection on exact moments.
inline SqueezingSolution tune_squeezing(int n_atoms, double target_db) {
    require(target_db < 0.0, ErrorCategory::config, "tune_squeezing: target must be < 0 dB");
    double lo = 0.0;          // db -> 0 as mu -> 0
    double hi = 2.0 / std::pow(static_cast<double>(n_atoms), 0.75);
    double db_hi = best_squeezing_db(n_atoms, hi);
    double db_prev = 0.0;
    int guard = 0;
    while (db_hi > target_db) {
        require(++guard < 60 && db_hi < db_prev + 1e-12, ErrorCategory::config,
                "tune_squeezing: target squeezing unreachable for this atom number");
        db_prev = db_hi;
        lo = hi;
        hi *= 1.5;
        db_hi = best_squeezing_db(n_atoms, hi);
    }
    for (int it = 0; it < 90; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (best_squeezing_db(n_atoms, mid) > target_db)
            lo = mid;
        else
            hi = mid;
    }
    SqueezingSolution sol;
    sol.mu = 0.5 * (lo + hi);
    sol.achieved_db = best_squeezing_db(n_atoms, sol.mu, &sol.tilt);
    return sol;
}

}  // namespace spinsplit
