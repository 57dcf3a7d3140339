#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "spinsplit/errors.hpp"
#include "spinsplit/rng.hpp"

namespace spinsplit {

using Complex = std::complex<double>;

// First and second moments of the collective spin (dimensionless spin units).
struct SpinMoments {
    std::array<double, 3> mean{};                 // <Sx>, <Sy>, <Sz>
    std::array<std::array<double, 3>, 3> cov{};   // symmetric covariance matrix

    double polarization() const {
        return std::sqrt(mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]);
    }
};

/// Symmetric state of N two-level atoms in the excitation-number basis.
/// Index k counts atoms in the upper state |2>; Sz eigenvalue is k - N/2.
class DickeState {
public:
    DickeState(int n_atoms, std::vector<Complex> amplitudes)
        : n_(n_atoms), amps_(std::move(amplitudes)) {
        require(n_ >= 1, ErrorCategory::domain, "DickeState needs at least one atom");
        require(amps_.size() == static_cast<std::size_t>(n_) + 1, ErrorCategory::domain,
                "DickeState amplitude vector must have length N+1");
        double norm2 = 0.0;
        for (const Complex& c : amps_) norm2 += std::norm(c);
        require(std::abs(norm2 - 1.0) < 1e-8, ErrorCategory::domain,
                "DickeState amplitudes are not normalized");
    }

    int n_atoms() const { return n_; }
    double spin_j() const { return 0.5 * n_; }
    std::span<const Complex> amplitudes() const { return amps_; }
    std::span<Complex> amplitudes() { return amps_; }

    double norm_squared() const {
        double s = 0.0;
        for (const Complex& c : amps_) s += std::norm(c);
        return s;
    }

    // |c_k|^2, the excitation-count distribution.
    std::vector<double> probabilities() const {
        std::vector<double> p(amps_.size());
        for (std::size_t k = 0; k < amps_.size(); ++k) p[k] = std::norm(amps_[k]);
        return p;
    }

private:
    int n_;
    std::vector<Complex> amps_;
};

// Ladder matrix element: S+ |k> = a_k |k+1>, a_k = sqrt((N-k)(k+1)).
inline double ladder_element(int n_atoms, int k) {
    return std::sqrt(static_cast<double>(n_atoms - k) * static_cast<double>(k + 1));
}

/// Spin-coherent state pointing along (polar, azimuth) on the Bloch sphere.
/// polar = 0 puts all atoms in |2> (the k = N pole).
inline DickeState coherent_state(int n_atoms, double polar, double azimuth) {
    require(n_atoms >= 1, ErrorCategory::domain, "coherent_state: n_atoms must be >= 1");
    const int n = n_atoms;
    std::vector<Complex> amps(static_cast<std::size_t>(n) + 1, Complex{0.0, 0.0});
    const double c = std::cos(0.5 * polar);
    const double s = std::sin(0.5 * polar);
    if (s == 0.0) {
        amps[static_cast<std::size_t>(n)] = 1.0;
        return DickeState(n, std::move(amps));
    }
    if (c == 0.0) {
        amps[0] = 1.0;
        return DickeState(n, std::move(amps));
    }
    // Binomial amplitudes computed in log space; factorial products overflow
    // well before N ~ 200.
    const double log_c = std::log(std::abs(c));
    const double log_s = std::log(std::abs(s));
    const double lg_n = std::lgamma(n + 1.0);
    double norm2 = 0.0;
    std::vector<double> mag(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        const double log_binom = 0.5 * (lg_n - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0));
        double m = std::exp(log_binom + k * log_c + (n - k) * log_s);
        if (c < 0.0 && (k % 2)) m = -m;  // polar beyond pi keeps the sign of cos^k
        mag[static_cast<std::size_t>(k)] = m;
        norm2 += m * m;
    }
    const double inv = 1.0 / std::sqrt(norm2);
    for (int k = 0; k <= n; ++k) {
        const double phase = -azimuth * k;
        amps[static_cast<std::size_t>(k)] =
            mag[static_cast<std::size_t>(k)] * inv * Complex{std::cos(phase), std::sin(phase)};
    }
    return DickeState(n, std::move(amps));
}

/// One-axis twisting: multiplies c_k by exp(-i mu k^2 / 2). Quadratic phase in
/// the excitation number; leaves |c_k|^2 (and all Sz statistics) unchanged.
inline DickeState one_axis_twist(const DickeState& state, double mu) {
    std::vector<Complex> amps(state.amplitudes().begin(), state.amplitudes().end());
    for (std::size_t k = 0; k < amps.size(); ++k) {
        const double phase = -0.5 * mu * static_cast<double>(k) * static_cast<double>(k);
        amps[k] *= Complex{std::cos(phase), std::sin(phase)};
    }
    return DickeState(state.n_atoms(), std::move(amps));
}

/// Exact first and second spin moments from the amplitudes.
///
/// Uses <S+>, <S+^2>, <S+S- + S-S+>, <S+Sz + SzS+> accumulated in one pass:
///   Sx = Re<S+>, Sy = Im<S+>,
///   <Sx^2> = (2 Re<S+^2> + <S+S- + S-S+>)/4,
///   <Sy^2> = (-2 Re<S+^2> + <S+S- + S-S+>)/4,
///   <{Sx,Sy}> = Im<S+^2>, <{Sx,Sz}> = Re<S+Sz+SzS+>, <{Sy,Sz}> = Im<S+Sz+SzS+>.
inline SpinMoments spin_moments(const DickeState& state) {
    const int n = state.n_atoms();
    const double j = state.spin_j();
    const auto amps = state.amplitudes();

    double sz = 0.0, sz2 = 0.0, pm_mp = 0.0;
    Complex sp{0.0, 0.0}, spp{0.0, 0.0}, spz{0.0, 0.0};
    for (int k = 0; k <= n; ++k) {
        const double p = std::norm(amps[static_cast<std::size_t>(k)]);
        const double m = k - j;
        sz += m * p;
        sz2 += m * m * p;
        // <S+S-> + <S-S+> = (k(N-k+1) + (N-k)(k+1)) |c_k|^2
        const double a_km1 = (k > 0) ? ladder_element(n, k - 1) : 0.0;
        const double a_k = (k < n) ? ladder_element(n, k) : 0.0;
        pm_mp += (a_km1 * a_km1 + a_k * a_k) * p;
        if (k < n) {
            const Complex cross = std::conj(amps[static_cast<std::size_t>(k + 1)]) *
                                  amps[static_cast<std::size_t>(k)];
            sp += a_k * cross;
            spz += a_k * (2.0 * m + 1.0) * cross;
        }
        if (k + 1 < n) {
            spp += ladder_element(n, k + 1) * ladder_element(n, k) *
                   std::conj(amps[static_cast<std::size_t>(k + 2)]) *
                   amps[static_cast<std::size_t>(k)];
        }
    }

    SpinMoments out;
    out.mean = {sp.real(), sp.imag(), sz};
    const double sx2 = 0.25 * (2.0 * spp.real() + pm_mp);
    const double sy2 = 0.25 * (-2.0 * spp.real() + pm_mp);
    const double xy = 0.5 * spp.imag();
    const double xz = 0.5 * spz.real();
    const double yz = 0.5 * spz.imag();
    out.cov[0][0] = sx2 - out.mean[0] * out.mean[0];
    out.cov[1][1] = sy2 - out.mean[1] * out.mean[1];
    out.cov[2][2] = sz2 - out.mean[2] * out.mean[2];
    out.cov[0][1] = out.cov[1][0] = xy - out.mean[0] * out.mean[1];
    out.cov[0][2] = out.cov[2][0] = xz - out.mean[0] * out.mean[2];
    out.cov[1][2] = out.cov[2][1] = yz - out.mean[1] * out.mean[2];
    return out;
}

/// Precomputed CDF for repeated projective sampling from one state.
class ExcitationSampler {
public:
    explicit ExcitationSampler(const DickeState& state) : cdf_(state.probabilities()) {
        double acc = 0.0;
        for (double& c : cdf_) {
            acc += c;
            c = acc;
        }
        cdf_.back() = 1.0;  // guard against rounding at the top
    }

    int sample(Rng& rng) const {
        const double u = rng.uniform();
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        return static_cast<int>(std::distance(cdf_.begin(), it));
    }

private:
    std::vector<double> cdf_;
};

/// Draws an excitation count k with probability |c_k|^2.
inline int sample_excitation_count(const DickeState& state, Rng& rng) {
    return ExcitationSampler(state).sample(rng);
}

/// Distributes k excitations uniformly among n_atoms atoms; returns per-atom
/// outcomes +1/2 (atom in |2>) or -1/2 (atom in |1>). All C(N,k) assignments
/// are equally likely; one uniform draw per atom.
inline std::vector<double> assign_outcomes(int k, int n_atoms, Rng& rng) {
    require(n_atoms >= 1, ErrorCategory::domain, "assign_outcomes: n_atoms must be >= 1");
    require(k >= 0 && k <= n_atoms, ErrorCategory::domain,
            "assign_outcomes: k out of [0, n_atoms]");
    std::vector<double> out(static_cast<std::size_t>(n_atoms), -0.5);
    int remaining_up = k;
    for (int i = 0; i < n_atoms && remaining_up > 0; ++i) {
        const int remaining_atoms = n_atoms - i;
        // Sequential hypergeometric draw: P(up) = remaining_up / remaining_atoms.
        if (rng.uniform() * remaining_atoms < static_cast<double>(remaining_up)) {
            out[static_cast<std::size_t>(i)] = 0.5;
            --remaining_up;
        }
    }
    return out;
}

// Moments of overlap-weighted local spins W_U = sum_i w^U_i s_i for fixed
// per-atom weights, with the outcome statistics taken from the state.
struct PartitionedMoments {
    double mean_a = 0.0, mean_b = 0.0;
    double var_a = 0.0, var_b = 0.0;
    double cov_ab = 0.0;
    double weight_sum_a = 0.0, weight_sum_b = 0.0;
    double weight_sq_sum_a = 0.0, weight_sq_sum_b = 0.0;
};

/// Exact moments of the weighted local spins for exchangeable outcomes.
///
/// With D = Sz (half the excitation-count imbalance), exchangeability gives
///   <s_i>        = <D>/N,
///   <s_i s_j>    = (<D^2> - N/4) / (N(N-1))    for i != j,
/// so for weight vectors w^U:
///   <W_U>     = (sum_i w^U_i) <D>/N,
///   <W_U W_V> = (1/4) sum_i w^U_i w^V_i
///             + [(<D^2> - N/4)/(N(N-1))] (sum_{i != j} w^U_i w^V_j).
inline PartitionedMoments partitioned_moments_exact(const DickeState& state,
                                                    std::span<const double> overlaps_a,
                                                    std::span<const double> overlaps_b) {
    const int n = state.n_atoms();
    require(overlaps_a.size() == static_cast<std::size_t>(n) &&
                overlaps_b.size() == static_cast<std::size_t>(n),
            ErrorCategory::domain, "partitioned_moments_exact: weight vectors must have length N");
    for (std::size_t i = 0; i < overlaps_a.size(); ++i) {
        require(overlaps_a[i] >= 0.0 && overlaps_a[i] <= 1.0 && overlaps_b[i] >= 0.0 &&
                    overlaps_b[i] <= 1.0,
                ErrorCategory::domain, "partitioned_moments_exact: weights must lie in [0,1]");
    }

    const double j = state.spin_j();
    const auto amps = state.amplitudes();
    double d1 = 0.0, d2 = 0.0;
    for (int k = 0; k <= n; ++k) {
        const double p = std::norm(amps[static_cast<std::size_t>(k)]);
        const double m = k - j;
        d1 += m * p;
        d2 += m * m * p;
    }

    PartitionedMoments out;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < overlaps_a.size(); ++i) {
        out.weight_sum_a += overlaps_a[i];
        out.weight_sum_b += overlaps_b[i];
        saa += overlaps_a[i] * overlaps_a[i];
        sbb += overlaps_b[i] * overlaps_b[i];
        sab += overlaps_a[i] * overlaps_b[i];
    }
    out.weight_sq_sum_a = saa;
    out.weight_sq_sum_b = sbb;

    const double nd = static_cast<double>(n);
    const double pair_corr = (n >= 2) ? (d2 - 0.25 * nd) / (nd * (nd - 1.0)) : 0.0;
    out.mean_a = out.weight_sum_a * d1 / nd;
    out.mean_b = out.weight_sum_b * d1 / nd;

    const double second_aa = 0.25 * saa + pair_corr * (out.weight_sum_a * out.weight_sum_a - saa);
    const double second_bb = 0.25 * sbb + pair_corr * (out.weight_sum_b * out.weight_sum_b - sbb);
    const double second_ab = 0.25 * sab + pair_corr * (out.weight_sum_a * out.weight_sum_b - sab);
    out.var_a = second_aa - out.mean_a * out.mean_a;
    out.var_b = second_bb - out.mean_b * out.mean_b;
    out.cov_ab = second_ab - out.mean_a * out.mean_b;
    return out;
}

}  // namespace spinsplit
