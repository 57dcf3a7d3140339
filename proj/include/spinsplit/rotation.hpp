#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "spinsplit/dicke.hpp"
#include "spinsplit/errors.hpp"

namespace spinsplit {

inline constexpr double kPi = 3.14159265358979323846264338327950288;

// J_0(x)..J_n(x) by Miller's downward recurrence, normalized with
// J_0 + 2 sum J_{2k} = 1. Stable for the large orders needed by the
// Chebyshev propagator (n up to a few thousand).
inline std::vector<double> bessel_j_table(int n_max, double x) {
    std::vector<double> out(static_cast<std::size_t>(n_max) + 1, 0.0);
    const double ax = std::abs(x);
    if (ax < 1e-300) {
        out[0] = 1.0;
        return out;
    }
    const int start = static_cast<int>(std::max(static_cast<double>(n_max), ax) * 1.15) + 40;
    double fp1 = 0.0;        // J_{m+1} (unscaled)
    double f = 1e-290;       // J_m seed
    double norm = 0.0;       // accumulates J_0 + 2 sum J_{2k}
    for (int m = start; m >= 1; --m) {
        const double fm1 = (2.0 * m / ax) * f - fp1;
        fp1 = f;
        f = fm1;
        if (m - 1 <= n_max) out[static_cast<std::size_t>(m - 1)] = f;
        if (((m - 1) % 2) == 0) norm += (m - 1 == 0) ? f : 2.0 * f;
        if (std::abs(f) > 1e280) {  // rescale before overflow
            const double scale = 1e-280;
            f *= scale;
            fp1 *= scale;
            norm *= scale;
            for (double& v : out) v *= scale;
        }
    }
    for (double& v : out) v /= norm;
    if (x < 0.0) {
        for (int m = 1; m <= n_max; m += 2) out[static_cast<std::size_t>(m)] = -out[static_cast<std::size_t>(m)];
    }
    return out;
}

namespace detail {

// y = (T/j) x with T the real symmetric tridiagonal similarity of Sy
// (off-diagonal a_k/2 = sqrt((k+1)(N-k))/2, zero diagonal).
inline void apply_scaled_tridiagonal(int n_atoms, double inv_j,
                                     const std::vector<Complex>& x, std::vector<Complex>& y) {
    const std::size_t dim = x.size();
    for (std::size_t k = 0; k < dim; ++k) {
        Complex acc{0.0, 0.0};
        if (k > 0) acc += 0.5 * ladder_element(n_atoms, static_cast<int>(k) - 1) * x[k - 1];
        if (k + 1 < dim) acc += 0.5 * ladder_element(n_atoms, static_cast<int>(k)) * x[k + 1];
        y[k] = acc * inv_j;
    }
}

}  // namespace detail

/// In-place exp(-i beta Jy) on a Dicke amplitude vector.
///
/// Sy is similar to a real symmetric tridiagonal T via D = diag(i^k); the
/// propagator is evaluated as a Chebyshev series
///   exp(-i beta T) = sum_n (2 - delta_n0) (-i)^n J_n(beta j) T_n(T/j),
/// whose coefficients cut off superexponentially past n ~ beta j. The spectrum
/// of T is exactly {-j..j}, so T/j needs no safety margin. Unitary to ~1e-13
/// for N up to a few thousand; never forms factorials.
inline void apply_exp_jy(std::vector<Complex>& amps, int n_atoms, double beta) {
    if (beta == 0.0) return;
    const double j = 0.5 * n_atoms;
    const double x = beta * j;
    const double ax = std::abs(x);
    const int n_terms = static_cast<int>(ax + 12.0 * std::cbrt(ax + 1.0) + 25.0);
    const std::vector<double> jn = bessel_j_table(n_terms, x);

    const std::size_t dim = amps.size();
    // Similarity transform u = D v, D = diag(i^k).
    static constexpr std::array<Complex, 4> i_pow = {Complex{1, 0}, Complex{0, 1},
                                                     Complex{-1, 0}, Complex{0, -1}};
    std::vector<Complex> prev(dim), cur(dim), next(dim), acc(dim);
    for (std::size_t k = 0; k < dim; ++k) prev[k] = i_pow[k % 4] * amps[k];

    const double inv_j = 1.0 / j;
    detail::apply_scaled_tridiagonal(n_atoms, inv_j, prev, cur);

    // acc = J_0 phi_0 + 2 sum_{n>=1} (-i)^n J_n phi_n
    static constexpr std::array<Complex, 4> mi_pow = {Complex{1, 0}, Complex{0, -1},
                                                      Complex{-1, 0}, Complex{0, 1}};
    for (std::size_t k = 0; k < dim; ++k)
        acc[k] = jn[0] * prev[k] + 2.0 * mi_pow[1] * jn[1] * cur[k];
    for (int n = 2; n <= n_terms; ++n) {
        detail::apply_scaled_tridiagonal(n_atoms, inv_j, cur, next);
        for (std::size_t k = 0; k < dim; ++k) next[k] = 2.0 * next[k] - prev[k];
        std::swap(prev, cur);
        std::swap(cur, next);
        const Complex coeff = 2.0 * mi_pow[static_cast<std::size_t>(n % 4)] * jn[static_cast<std::size_t>(n)];
        if (std::abs(jn[static_cast<std::size_t>(n)]) > 0.0) {
            for (std::size_t k = 0; k < dim; ++k) acc[k] += coeff * cur[k];
        }
    }
    // Undo the similarity: v = D^dagger w.
    for (std::size_t k = 0; k < dim; ++k) amps[k] = mi_pow[k % 4] * acc[k];
}

// 3x3 rotation matrix about a unit axis (Rodrigues form).
inline std::array<std::array<double, 3>, 3> rotation_matrix(const std::array<double, 3>& axis,
                                                            double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double t = 1.0 - c;
    const double x = axis[0], y = axis[1], z = axis[2];
    return {{{t * x * x + c, t * x * y - s * z, t * x * z + s * y},
             {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
             {t * x * z - s * y, t * y * z + s * x, t * z * z + c}}};
}

struct EulerZyz {
    double alpha = 0.0, beta = 0.0, gamma = 0.0;
};

// Decomposes R = Rz(alpha) Ry(beta) Rz(gamma).
inline EulerZyz euler_zyz(const std::array<std::array<double, 3>, 3>& r) {
    EulerZyz e;
    const double c = std::clamp(r[2][2], -1.0, 1.0);
    e.beta = std::acos(c);
    const double sb = std::sin(e.beta);
    if (sb > 1e-12) {
        e.alpha = std::atan2(r[1][2], r[0][2]);
        e.gamma = std::atan2(r[2][1], -r[2][0]);
    } else if (c > 0.0) {
        e.alpha = std::atan2(r[1][0], r[0][0]);  // pure z-rotation
        e.gamma = 0.0;
    } else {
        e.alpha = std::atan2(-r[1][0], -r[0][0]);  // Ry(pi) residue
        e.gamma = 0.0;
    }
    return e;
}

namespace detail {

inline void apply_z_phases(std::vector<Complex>& amps, double j, double angle) {
    if (angle == 0.0) return;
    for (std::size_t k = 0; k < amps.size(); ++k) {
        const double phase = -angle * (static_cast<double>(k) - j);
        amps[k] *= Complex{std::cos(phase), std::sin(phase)};
    }
}

}  // namespace detail

/// Unitary spin rotation exp(-i angle (axis . S)) in the spin-j representation,
/// applied through the zyz Euler split (two diagonal phase sweeps around one
/// Jy propagation). Global phase is unconstrained for odd N.
inline DickeState rotate(const DickeState& state, const std::array<double, 3>& axis,
                         double angle) {
    const double axis_norm =
        std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    require(std::abs(axis_norm - 1.0) < 1e-9, ErrorCategory::domain,
            "rotate: axis must be a unit vector");
    std::vector<Complex> amps(state.amplitudes().begin(), state.amplitudes().end());
    if (angle != 0.0) {
        const EulerZyz e = euler_zyz(rotation_matrix(axis, angle));
        const double j = state.spin_j();
        detail::apply_z_phases(amps, j, e.gamma);
        apply_exp_jy(amps, state.n_atoms(), e.beta);
        detail::apply_z_phases(amps, j, e.alpha);
    }
    return DickeState(state.n_atoms(), std::move(amps));
}

/// Rotation about z only (phase sweep, no Jy propagation).
inline DickeState rotate_z(const DickeState& state, double angle) {
    std::vector<Complex> amps(state.amplitudes().begin(), state.amplitudes().end());
    detail::apply_z_phases(amps, state.spin_j(), angle);
    return DickeState(state.n_atoms(), std::move(amps));
}

// Measurement axes of the acquisition protocol. Counting excitations after
// the listed rotation realizes a projective measurement of the labeled spin
// component: rotating by -pi/2 (+pi/2) about y maps Sx (-Sx) onto the counting
// axis, rotating by +pi/2 about the mean-spin direction x maps Sy onto it, and
// the z measurement applies no rotation.
enum class Axis { plus_x, minus_x, y, z };

struct AxisRotation {
    std::array<double, 3> axis{0.0, 0.0, 1.0};
    double angle = 0.0;
};

inline AxisRotation axis_rotation(Axis a) {
    switch (a) {
        case Axis::plus_x: return {{0.0, 1.0, 0.0}, -0.5 * kPi};
        case Axis::minus_x: return {{0.0, 1.0, 0.0}, 0.5 * kPi};
        case Axis::y: return {{1.0, 0.0, 0.0}, 0.5 * kPi};
        case Axis::z: return {{0.0, 0.0, 1.0}, 0.0};
    }
    return {};
}

inline std::string_view axis_label(Axis a) {
    switch (a) {
        case Axis::plus_x: return "plus_x";
        case Axis::minus_x: return "minus_x";
        case Axis::y: return "y";
        case Axis::z: return "z";
    }
    return "z";
}

inline Axis axis_from_label(std::string_view label) {
    if (label == "plus_x") return Axis::plus_x;
    if (label == "minus_x") return Axis::minus_x;
    if (label == "y") return Axis::y;
    if (label == "z") return Axis::z;
    fail(ErrorCategory::corrupt, "unknown axis label: " + std::string(label));
}

inline DickeState rotate_to_axis(const DickeState& state, Axis a) {
    const AxisRotation r = axis_rotation(a);
    if (r.angle == 0.0) return state;
    return rotate(state, r.axis, r.angle);
}

}  // namespace spinsplit
