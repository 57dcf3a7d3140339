#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spinsplit/dicke.hpp"
#include "spinsplit/errors.hpp"
#include "spinsplit/regions.hpp"
#include "spinsplit/stats.hpp"

namespace spinsplit {

/// One acquisition subset: local spin values per measurement axis for both
/// regions, sharing one mask pair and its eta/noise characterization.
struct SubsetBlock {
    int subset_id = 0;
    std::vector<double> a_plus_x, a_minus_x, a_y, a_z;
    std::vector<double> b_plus_x, b_minus_x, b_y, b_z;
    double noise_var_a = 0.0;  // Var(Delta^A)
    double noise_var_b = 0.0;  // Var(Delta^B)

    std::span<const double> region_axis(char region, Axis axis) const {
        const bool a = region == 'A';
        switch (axis) {
            case Axis::plus_x: return a ? a_plus_x : b_plus_x;
            case Axis::minus_x: return a ? a_minus_x : b_minus_x;
            case Axis::y: return a ? a_y : b_y;
            case Axis::z: return a ? a_z : b_z;
        }
        return {};
    }
};

struct GainPair {
    double g_z = 0.0;
    double g_y = 0.0;
};

/// |<S_x>| from the two rotation directions: |mean(+x) - mean(-x)| / 2.
/// Robust against the overall sign convention of the extracted values.
inline double mean_sx(const SubsetBlock& block, char region) {
    const auto plus = block.region_axis(region, Axis::plus_x);
    const auto minus = block.region_axis(region, Axis::minus_x);
    require(!plus.empty() && !minus.empty(), ErrorCategory::domain,
            "mean_sx: missing +x or -x samples");
    return 0.5 * std::abs(mean(plus) - mean(minus));
}

struct GainResult {
    double g = 0.0;
    bool degenerate = false;  // noise exceeded the signal variance; fell back to 0
};

/// Noise-corrected regression gain g* = -Cov(S^A, S^B) / (Var(S^A) - Var(Delta^A)).
inline GainResult optimal_gain(std::span<const double> samples_a,
                               std::span<const double> samples_b, double noise_var_a) {
    require(samples_a.size() == samples_b.size(), ErrorCategory::domain,
            "optimal_gain: sample length mismatch");
    require(samples_a.size() >= 3, ErrorCategory::domain, "optimal_gain: needs >= 3 pairs");
    const double cov = sample_covariance(samples_a, samples_b);
    const double denom = sample_variance(samples_a) - noise_var_a;
    if (!(denom > 0.0)) return {0.0, true};
    return {-cov / denom, false};
}

/// Unbiased inferred variance: (1/(m-2)) sum_j [(g a_j + b_j) - (g abar + bbar)]^2.
/// The m-2 normalization accounts for the degree of freedom absorbed by the
/// fitted gain, as in the variance of linear-regression residuals.
inline double inferred_variance(std::span<const double> samples_a,
                                std::span<const double> samples_b, double g) {
    require(samples_a.size() == samples_b.size(), ErrorCategory::domain,
            "inferred_variance: sample length mismatch");
    const std::size_t m = samples_a.size();
    require(m >= 3, ErrorCategory::domain, "inferred_variance: needs m >= 3");
    double mean_comb = 0.0;
    for (std::size_t j = 0; j < m; ++j) mean_comb += g * samples_a[j] + samples_b[j];
    mean_comb /= static_cast<double>(m);
    double s = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double d = g * samples_a[j] + samples_b[j] - mean_comb;
        s += d * d;
    }
    return s / static_cast<double>(m - 2);
}

/// Removes the detection-noise contribution Var(g Delta^A + Delta^B) from a
/// measured combined variance. May return a negative value; the caller flags
/// it but keeps it in criterion arithmetic.
inline double subtract_noise(double raw_var, double g, double noise_var_a, double noise_var_b) {
    require(noise_var_a >= 0.0 && noise_var_b >= 0.0, ErrorCategory::domain,
            "subtract_noise: noise variances must be >= 0");
    return raw_var - g * g * noise_var_a - noise_var_b;
}

enum class SteeringDirection { a_to_b, b_to_a };

// One criterion evaluation on one subset, with the intermediate quantities
// kept for audit output.
struct CriterionValue {
    double value = 0.0;
    GainPair gains;
    double var_inf_z_raw = 0.0, var_inf_z = 0.0;
    double var_inf_y_raw = 0.0, var_inf_y = 0.0;
    double mean_sx_a = 0.0, mean_sx_b = 0.0;
    bool negative_variance = false;
    bool gain_fallback = false;
};

namespace detail {

struct InferredPair {
    double raw = 0.0;
    double corrected = 0.0;
    GainResult gain;
};

inline InferredPair inferred_for_axis(const SubsetBlock& block, Axis axis,
                                      SteeringDirection dir, std::optional<double> fixed_gain) {
    const char steering = dir == SteeringDirection::a_to_b ? 'A' : 'B';
    const char steered = dir == SteeringDirection::a_to_b ? 'B' : 'A';
    const auto sa = block.region_axis(steering, axis);
    const auto sb = block.region_axis(steered, axis);
    const double nva = dir == SteeringDirection::a_to_b ? block.noise_var_a : block.noise_var_b;
    const double nvb = dir == SteeringDirection::a_to_b ? block.noise_var_b : block.noise_var_a;
    InferredPair out;
    if (fixed_gain)
        out.gain = {*fixed_gain, false};
    else
        out.gain = optimal_gain(sa, sb, nva);
    out.raw = inferred_variance(sa, sb, out.gain.g);
    out.corrected = subtract_noise(out.raw, out.gain.g, nva, nvb);
    return out;
}

}  // namespace detail

/// Entanglement criterion
///   E_Ent = 4 Var(g_z S^A_z + S^B_z) Var(g_y S^A_y + S^B_y)
///           / (|g_z g_y| |<S^A_x>| + |<S^B_x>|)^2,
/// with noise-subtracted inferred variances; gains optimized on the subset
/// unless fixed ones are supplied. E_Ent < 1 certifies entanglement.
inline CriterionValue entanglement_criterion(const SubsetBlock& block,
                                             std::optional<GainPair> gains = std::nullopt) {
    const auto z = detail::inferred_for_axis(
        block, Axis::z, SteeringDirection::a_to_b,
        gains ? std::optional<double>(gains->g_z) : std::nullopt);
    const auto y = detail::inferred_for_axis(
        block, Axis::y, SteeringDirection::a_to_b,
        gains ? std::optional<double>(gains->g_y) : std::nullopt);
    CriterionValue out;
    out.gains = {z.gain.g, y.gain.g};
    out.var_inf_z_raw = z.raw;
    out.var_inf_z = z.corrected;
    out.var_inf_y_raw = y.raw;
    out.var_inf_y = y.corrected;
    out.mean_sx_a = mean_sx(block, 'A');
    out.mean_sx_b = mean_sx(block, 'B');
    out.negative_variance = z.corrected < 0.0 || y.corrected < 0.0;
    out.gain_fallback = z.gain.degenerate || y.gain.degenerate;
    const double denom_root =
        std::abs(out.gains.g_z * out.gains.g_y) * out.mean_sx_a + out.mean_sx_b;
    require(denom_root > 0.0, ErrorCategory::domain, "entanglement_criterion: zero denominator");
    out.value = 4.0 * z.corrected * y.corrected / (denom_root * denom_root);
    return out;
}

/// EPR steering criterion for the given direction:
///   E_EPR = 4 Var_inf(z) Var_inf(y) / |<S^steered_x>|^2.
/// E_EPR < 1 demonstrates the paradox (steered party's Heisenberg bound beaten).
inline CriterionValue epr_criterion(const SubsetBlock& block, SteeringDirection dir,
                                    std::optional<GainPair> gains = std::nullopt) {
    const auto z = detail::inferred_for_axis(
        block, Axis::z, dir, gains ? std::optional<double>(gains->g_z) : std::nullopt);
    const auto y = detail::inferred_for_axis(
        block, Axis::y, dir, gains ? std::optional<double>(gains->g_y) : std::nullopt);
    CriterionValue out;
    out.gains = {z.gain.g, y.gain.g};
    out.var_inf_z_raw = z.raw;
    out.var_inf_z = z.corrected;
    out.var_inf_y_raw = y.raw;
    out.var_inf_y = y.corrected;
    out.mean_sx_a = mean_sx(block, 'A');
    out.mean_sx_b = mean_sx(block, 'B');
    out.negative_variance = z.corrected < 0.0 || y.corrected < 0.0;
    out.gain_fallback = z.gain.degenerate || y.gain.degenerate;
    const double steered_sx = dir == SteeringDirection::a_to_b ? out.mean_sx_b : out.mean_sx_a;
    require(steered_sx > 0.0, ErrorCategory::domain, "epr_criterion: zero denominator");
    out.value = 4.0 * z.corrected * y.corrected / (steered_sx * steered_sx);
    return out;
}

/// Spin uncertainty product of one region (non-inferred variances, noise
/// subtracted): 4 Var(S_z) Var(S_y) / |<S_x>|^2. Must satisfy >= 1 for any
/// physical state; the shaded-region baseline of the steering plots.
inline double uncertainty_product(const SubsetBlock& block, char region) {
    const auto z = block.region_axis(region, Axis::z);
    const auto y = block.region_axis(region, Axis::y);
    const double nv = region == 'A' ? block.noise_var_a : block.noise_var_b;
    const double vz = sample_variance(z) - nv;
    const double vy = sample_variance(y) - nv;
    const double sx = mean_sx(block, region);
    require(sx > 0.0, ErrorCategory::domain, "uncertainty_product: zero polarization");
    return 4.0 * vz * vy / (sx * sx);
}

/// Analytic crosstalk floor: the lowest EPR criterion value that boundary
/// atoms contributing signal to both regions can fake for an uncorrelated
/// (coherent) state, after eta normalization of the local spins:
///   floor = [ (<rho fA^2><rho fB^2> - <rho fA fB>^2) / (<rho fA^2><rho fB^2>) ]^2.
/// Evaluated per state by numerical integration; the smaller value is returned.
/// Equals 1 when the kernels never overlap both regions, 0 when the regions
/// coincide.
inline double crosstalk_floor(const CloudDensity& density, const PsfModel& psf,
                              const RegionMask& mask_a, const RegionMask& mask_b,
                              const QuadratureOptions& opt = {}) {
    double floor = 1.0;
    for (int state = 0; state < 2; ++state) {
        const RegionIntegrals m = region_integrals(density, psf, state, mask_a.grid(state),
                                                   &mask_b.grid(state), opt);
        require(m.mean_f2_a > 1e-14 && m.mean_f2_b > 1e-14, ErrorCategory::domain,
                "crosstalk_floor: empty region");
        const double u = m.mean_fafb * m.mean_fafb / (m.mean_f2_a * m.mean_f2_b);
        const double value = (1.0 - u) * (1.0 - u);
        floor = std::min(floor, value);
    }
    return floor;
}

struct WinelandValue {
    double xi2 = 0.0;
    double db = 0.0;
};

/// Wineland squeezing parameter from exact moments: the variance is minimized
/// over the plane perpendicular to the mean spin.
inline WinelandValue wineland_parameter(const SpinMoments& moments, double n_atoms) {
    const double pol = moments.polarization();
    require(pol > 0.0, ErrorCategory::domain, "wineland_parameter: zero polarization");
    // Orthonormal basis {u, v} perpendicular to the mean spin.
    const std::array<double, 3> n = {moments.mean[0] / pol, moments.mean[1] / pol,
                                     moments.mean[2] / pol};
    std::array<double, 3> seed = std::abs(n[0]) < 0.9 ? std::array<double, 3>{1.0, 0.0, 0.0}
                                                      : std::array<double, 3>{0.0, 1.0, 0.0};
    std::array<double, 3> u{}, v{};
    const double dot = seed[0] * n[0] + seed[1] * n[1] + seed[2] * n[2];
    double un = 0.0;
    for (int i = 0; i < 3; ++i) {
        u[i] = seed[i] - dot * n[i];
        un += u[i] * u[i];
    }
    un = std::sqrt(un);
    for (int i = 0; i < 3; ++i) u[i] /= un;
    v = {n[1] * u[2] - n[2] * u[1], n[2] * u[0] - n[0] * u[2], n[0] * u[1] - n[1] * u[0]};

    auto quad = [&](const std::array<double, 3>& a, const std::array<double, 3>& b) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) s += a[i] * moments.cov[i][k] * b[k];
        return s;
    };
    const double vuu = quad(u, u);
    const double vvv = quad(v, v);
    const double vuv = quad(u, v);
    const double mean_perp = 0.5 * (vuu + vvv);
    const double radius = std::sqrt(0.25 * (vuu - vvv) * (vuu - vvv) + vuv * vuv);
    const double var_min = mean_perp - radius;

    WinelandValue out;
    out.xi2 = n_atoms * var_min / (pol * pol);
    out.db = 10.0 * std::log10(out.xi2);
    return out;
}

/// Wineland parameter from measured samples of the squeezed quadrature:
/// xi^2 = N (Var(z) - Var(Delta)) / |<S_x>|^2.
inline WinelandValue wineland_parameter(std::span<const double> z_samples, double noise_var,
                                        double sx_abs, double n_atoms) {
    require(sx_abs > 0.0, ErrorCategory::domain, "wineland_parameter: zero polarization");
    const double var = sample_variance(z_samples) - noise_var;
    WinelandValue out;
    out.xi2 = n_atoms * var / (sx_abs * sx_abs);
    out.db = 10.0 * std::log10(std::max(out.xi2, 1e-300));
    return out;
}

/// Unweighted mean of per-subset criterion values with its standard error.
inline Estimate aggregate_subsets(std::span<const double> subset_values) {
    require(subset_values.size() >= 2, ErrorCategory::domain,
            "aggregate_subsets: needs at least 2 subsets");
    return mean_with_sem(subset_values);
}

/// Aggregated criteria for one mask configuration, with the intermediate
/// quantities needed for audit.
struct CriteriaReport {
    std::string mask_descriptor;
    double splitting_ratio = 0.0;  // N^A / (N^A + N^B)
    int subsets = 0;

    Estimate e_ent;
    Estimate e_epr_ab;
    Estimate e_epr_ba;
    Estimate noninferred_a;  // uncertainty product of region A
    Estimate noninferred_b;

    std::vector<GainPair> gains_ent;     // per subset
    std::vector<GainPair> gains_epr_ab;
    std::vector<GainPair> gains_epr_ba;

    Estimate var_inf_z_ab, var_inf_y_ab;      // noise-subtracted
    Estimate var_inf_z_ab_raw, var_inf_y_ab_raw;

    double crosstalk_floor_ab = 1.0;
    double crosstalk_floor_ba = 1.0;
    double wineland_db = 0.0;

    double eta_a = 1.0;
    double eta_b = 1.0;
    double noise_var_a = 0.0;
    double noise_var_b = 0.0;
    double mean_atoms_a = 0.0;  // detected N^A
    double mean_atoms_b = 0.0;
    double mean_sx_a = 0.0;
    double mean_sx_b = 0.0;

    bool negative_variance_flag = false;
    bool gain_fallback_flag = false;

    void validate() const {
        require(e_ent.sem >= 0.0 && e_epr_ab.sem >= 0.0 && e_epr_ba.sem >= 0.0,
                ErrorCategory::internal, "CriteriaReport: negative SEM");
        require(splitting_ratio >= 0.0 && splitting_ratio <= 1.0, ErrorCategory::internal,
                "CriteriaReport: splitting ratio outside [0,1]");
    }
};

}  // namespace spinsplit
