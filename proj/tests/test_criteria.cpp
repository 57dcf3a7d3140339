#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "spinsplit/criteria.hpp"
#include "spinsplit/dicke.hpp"
#include "spinsplit/regions.hpp"
#include "spinsplit/rng.hpp"
#include "spinsplit/state_prep.hpp"
#include "spinsplit/stats.hpp"

using namespace spinsplit;

namespace {

// Gaussian pair sampler with prescribed variances and covariance.
struct PairSampler {
    double var_a, var_b, cov;
    void sample(Rng& rng, double& a, double& b) const {
        const double u = rng.normal();
        const double w = rng.normal();
        a = std::sqrt(var_a) * u;
        const double resid = var_b - cov * cov / var_a;
        b = cov / std::sqrt(var_a) * u + std::sqrt(std::max(resid, 0.0)) * w;
    }
};

// Synthetic subset with Gaussian statistics: z and y pair samplers, fixed
// polarizations, optional per-sample detection noise.
struct BlockSpec {
    PairSampler z, y;
    double sx_a = 100.0, sx_b = 100.0;
    int m_x = 4, m_y = 70, m_z = 60;
    double noise_var_a = 0.0, noise_var_b = 0.0;
};

SubsetBlock make_block(const BlockSpec& spec, Rng& rng) {
    SubsetBlock blk;
    blk.noise_var_a = spec.noise_var_a;
    blk.noise_var_b = spec.noise_var_b;
    auto noisy = [&](double v, double nv) {
        return nv > 0.0 ? v + std::sqrt(nv) * rng.normal() : v;
    };
    for (int i = 0; i < spec.m_x; ++i) {
        blk.a_plus_x.push_back(noisy(spec.sx_a, spec.noise_var_a));
        blk.b_plus_x.push_back(noisy(spec.sx_b, spec.noise_var_b));
    }
    for (int i = 0; i < spec.m_x; ++i) {
        blk.a_minus_x.push_back(noisy(-spec.sx_a, spec.noise_var_a));
        blk.b_minus_x.push_back(noisy(-spec.sx_b, spec.noise_var_b));
    }
    for (int i = 0; i < spec.m_y; ++i) {
        double a, b;
        spec.y.sample(rng, a, b);
        blk.a_y.push_back(noisy(a, spec.noise_var_a));
        blk.b_y.push_back(noisy(b, spec.noise_var_b));
    }
    for (int i = 0; i < spec.m_z; ++i) {
        double a, b;
        spec.z.sample(rng, a, b);
        blk.a_z.push_back(noisy(a, spec.noise_var_a));
        blk.b_z.push_back(noisy(b, spec.noise_var_b));
    }
    return blk;
}

}  // namespace

TEST_CASE("mean_sx: fully polarized and null samples") {
    SubsetBlock blk;
    blk.a_plus_x = {295.0, 295.0};
    blk.a_minus_x = {-295.0, -295.0};
    REQUIRE(mean_sx(blk, 'A') == 295.0);
    blk.a_plus_x = {0.0, 0.0};
    blk.a_minus_x = {0.0, 0.0};
    REQUIRE(mean_sx(blk, 'A') == 0.0);
    REQUIRE_THROWS_AS(mean_sx(blk, 'B'), Error);
}

TEST_CASE("optimal gain: zero covariance and perfect anticorrelation") {
    Rng rng(301);
    std::vector<double> a(50), b(50);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = rng.normal();
        b[i] = -a[i];
    }
    REQUIRE(std::abs(optimal_gain(a, b, 0.0).g - 1.0) < 1e-12);

    // Exactly uncorrelated pattern.
    const std::vector<double> c = {1.0, -1.0, 1.0, -1.0};
    const std::vector<double> d = {1.0, 1.0, -1.0, -1.0};
    REQUIRE(std::abs(optimal_gain(c, d, 0.0).g) < 1e-12);

    // Degenerate: claimed detection noise above the sample variance.
    const GainResult g = optimal_gain(a, b, 10.0);
    REQUIRE(g.degenerate);
    REQUIRE(g.g == 0.0);
    REQUIRE_THROWS_AS(
        optimal_gain(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0}, 0.0), Error);
}

TEST_CASE("optimal gain matches the closed-form regression value") {
    // Correlated Gaussian pairs with known parameters; the mean estimated gain
    // over repetitions approaches -cov/var.
    const PairSampler ps{4.0, 9.0, -3.0};
    Rng rng(307);
    const int reps = 400, m = 70;
    std::vector<double> gains(reps);
    for (int r = 0; r < reps; ++r) {
        std::vector<double> a(m), b(m);
        for (int i = 0; i < m; ++i)
            ps.sample(rng, a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]);
        gains[static_cast<std::size_t>(r)] = optimal_gain(a, b, 0.0).g;
    }
    const Estimate g = mean_with_sem(gains);
    REQUIRE(std::abs(g.value - 0.75) < 4.0 * g.sem);
}

TEST_CASE("inferred variance: exact zeros and error paths") {
    const std::vector<double> constant(10, 3.7);
    REQUIRE(inferred_variance(constant, constant, -1.0) == 0.0);
    std::vector<double> a = {1.0, -2.0, 0.5, 3.0};
    std::vector<double> b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) b[i] = -0.8 * a[i];
    REQUIRE(inferred_variance(a, b, 0.8) < 1e-15);
    REQUIRE_THROWS_AS(
        inferred_variance(std::vector<double>{1.0, 2.0}, std::vector<double>{1.0, 2.0}, 0.0),
        Error);
}

TEST_CASE("inferred variance: the m-2 normalization is unbiased at the fitted gain") {
    // True residual variance var_b - cov^2/var_a = 9 - 1 = 8.
    const PairSampler ps{4.0, 9.0, -2.0};
    const double truth = 9.0 - 4.0 / 4.0;
    Rng rng(311);
    const int reps = 10000, m = 70;
    std::vector<double> est_m2(reps), est_m1(reps);
    std::vector<double> a(m), b(m);
    for (int r = 0; r < reps; ++r) {
        for (int i = 0; i < m; ++i)
            ps.sample(rng, a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]);
        const double g = optimal_gain(a, b, 0.0).g;
        const double v = inferred_variance(a, b, g);
        est_m2[static_cast<std::size_t>(r)] = v;
        est_m1[static_cast<std::size_t>(r)] = v * (m - 2) / (m - 1);
    }
    const Estimate m2 = mean_with_sem(est_m2);
    REQUIRE(std::abs(m2.value - truth) < 0.02 * truth);
    // The m-1 normalization is biased low by exactly 1/(m-1); with 1e4
    // repetitions that bias stands out at many standard errors.
    const Estimate m1 = mean_with_sem(est_m1);
    REQUIRE(truth - m1.value > 4.0 * m1.sem);
}

TEST_CASE("subtract_noise arithmetic and error paths") {
    REQUIRE(subtract_noise(5.0, 0.0, 0.0, 0.0) == 5.0);
    REQUIRE(subtract_noise(5.0, 1.0, 1.0, 1.0) == 3.0);
    REQUIRE(subtract_noise(1.0, 2.0, 1.0, 1.0) == -4.0);  // may go negative, kept
    REQUIRE_THROWS_AS(subtract_noise(5.0, 1.0, -1.0, 0.0), Error);
}

TEST_CASE("noise subtraction recovers the clean variance in paired simulations") {
    // Same underlying samples, one copy with additive Gaussian detection noise:
    // the corrected noisy estimate agrees with the clean one.
    const PairSampler ps{50.0, 60.0, -40.0};
    const double nva = 3.0, nvb = 2.5;
    Rng rng(313);
    const int reps = 3000, m = 70;
    std::vector<double> clean(reps), corrected(reps);
    std::vector<double> a(m), b(m), an(m), bn(m);
    for (int r = 0; r < reps; ++r) {
        for (int i = 0; i < m; ++i) {
            ps.sample(rng, a[static_cast<std::size_t>(i)], b[static_cast<std::size_t>(i)]);
            an[static_cast<std::size_t>(i)] =
                a[static_cast<std::size_t>(i)] + std::sqrt(nva) * rng.normal();
            bn[static_cast<std::size_t>(i)] =
                b[static_cast<std::size_t>(i)] + std::sqrt(nvb) * rng.normal();
        }
        const double g = optimal_gain(an, bn, nva).g;
        clean[static_cast<std::size_t>(r)] = inferred_variance(a, b, g);
        corrected[static_cast<std::size_t>(r)] =
            subtract_noise(inferred_variance(an, bn, g), g, nva, nvb);
    }
    const Estimate mc = mean_with_sem(clean);
    const Estimate mn = mean_with_sem(corrected);
    REQUIRE(std::abs(mn.value - mc.value) < 4.0 * std::sqrt(mn.sem * mn.sem + mc.sem * mc.sem));
}

TEST_CASE("entanglement criterion: zero gains reduce to the local uncertainty product") {
    BlockSpec spec;
    spec.z = {25.0, 25.0, 0.0};
    spec.y = {25.0, 25.0, 0.0};
    Rng rng(317);
    const SubsetBlock blk = make_block(spec, rng);
    const CriterionValue v = entanglement_criterion(blk, GainPair{0.0, 0.0});
    const double vz = inferred_variance(blk.a_z, blk.b_z, 0.0);
    const double vy = inferred_variance(blk.a_y, blk.b_y, 0.0);
    const double sxb = mean_sx(blk, 'B');
    REQUIRE(std::abs(v.value - 4.0 * vz * vy / (sxb * sxb)) < 1e-12);
}

TEST_CASE("criteria on uncorrelated projection-noise data sit at one") {
    // CSS-like synthetic statistics: Var = N/4 per region, no correlations.
    const double n_region = 295.0;
    BlockSpec spec;
    spec.z = {n_region / 4.0, n_region / 4.0, 0.0};
    spec.y = {n_region / 4.0, n_region / 4.0, 0.0};
    spec.sx_a = n_region / 2.0;
    spec.sx_b = n_region / 2.0;
    Rng rng(331);
    std::vector<double> ent, ab, ba;
    for (int s = 0; s < 60; ++s) {
        const SubsetBlock blk = make_block(spec, rng);
        ent.push_back(entanglement_criterion(blk).value);
        ab.push_back(epr_criterion(blk, SteeringDirection::a_to_b).value);
        ba.push_back(epr_criterion(blk, SteeringDirection::b_to_a).value);
    }
    const Estimate e = aggregate_subsets(ent);
    const Estimate eab = aggregate_subsets(ab);
    const Estimate eba = aggregate_subsets(ba);
    REQUIRE(std::abs(e.value - 1.0) < 3.0 * e.sem);
    REQUIRE(std::abs(eab.value - 1.0) < 3.0 * eab.sem);
    REQUIRE(std::abs(eba.value - 1.0) < 3.0 * eba.sem);
}

TEST_CASE("criterion ordering and direction symmetry") {
    // Correlated (squeezed-like) statistics, symmetric between A and B.
    BlockSpec spec;
    spec.z = {50.0, 50.0, -35.0};
    spec.y = {120.0, 120.0, 45.0};
    spec.sx_a = 140.0;
    spec.sx_b = 140.0;
    Rng rng(337);
    std::vector<double> ent, ab, ba;
    for (int s = 0; s < 60; ++s) {
        const SubsetBlock blk = make_block(spec, rng);
        ent.push_back(entanglement_criterion(blk).value);
        ab.push_back(epr_criterion(blk, SteeringDirection::a_to_b).value);
        ba.push_back(epr_criterion(blk, SteeringDirection::b_to_a).value);
        // The shared numerator makes the ordering exact per subset.
        REQUIRE(ent.back() <= ab.back() + 1e-12);
    }
    const Estimate eab = aggregate_subsets(ab);
    const Estimate eba = aggregate_subsets(ba);
    REQUIRE(std::abs(eab.value - eba.value) <
            3.0 * std::sqrt(eab.sem * eab.sem + eba.sem * eba.sem));
    REQUIRE(aggregate_subsets(ent).value < 1.0);
}

TEST_CASE("criteria are invariant under exchanging the +x and -x groups") {
    BlockSpec spec;
    spec.z = {50.0, 50.0, -35.0};
    spec.y = {120.0, 120.0, 45.0};
    Rng rng(347);
    SubsetBlock blk = make_block(spec, rng);
    const double before_ent = entanglement_criterion(blk).value;
    const double before_ab = epr_criterion(blk, SteeringDirection::a_to_b).value;
    std::swap(blk.a_plus_x, blk.a_minus_x);
    std::swap(blk.b_plus_x, blk.b_minus_x);
    REQUIRE(std::abs(entanglement_criterion(blk).value - before_ent) < 1e-12);
    REQUIRE(std::abs(epr_criterion(blk, SteeringDirection::a_to_b).value - before_ab) < 1e-12);
}

TEST_CASE("optimal gains never lose to g = 0 beyond estimator noise") {
    BlockSpec spec;
    spec.z = {50.0, 50.0, -30.0};
    spec.y = {120.0, 120.0, 40.0};
    Rng rng(349);
    for (int s = 0; s < 40; ++s) {
        const SubsetBlock blk = make_block(spec, rng);
        const double g = optimal_gain(blk.a_z, blk.b_z, 0.0).g;
        const double with_gain = inferred_variance(blk.a_z, blk.b_z, g);
        const double without = inferred_variance(blk.a_z, blk.b_z, 0.0);
        const double se = without * std::sqrt(2.0 / (blk.a_z.size() - 2.0));
        REQUIRE(with_gain <= without + 3.0 * se);
    }
}

TEST_CASE("estimator pipeline converges to the analytic criterion value") {
    // Gaussian samples drawn from exact second moments; as m grows the
    // estimated criterion approaches the closed-form value.
    const double var_a = 50.0, var_b = 55.0, cov_z = -35.0;
    const double vy_a = 130.0, vy_b = 140.0, cov_y = 48.0;
    const double sx = 140.0;
    const double analytic =
        4.0 * (var_b - cov_z * cov_z / var_a) * (vy_b - cov_y * cov_y / vy_a) / (sx * sx);

    Rng rng(353);
    double prev_err = 1e9;
    for (int m : {70, 700, 7000}) {
        BlockSpec spec;
        spec.z = {var_a, var_b, cov_z};
        spec.y = {vy_a, vy_b, cov_y};
        spec.sx_a = sx;
        spec.sx_b = sx;
        spec.m_y = m;
        spec.m_z = m;
        spec.m_x = std::max(4, m / 16);
        std::vector<double> values;
        for (int s = 0; s < 24; ++s)
            values.push_back(
                epr_criterion(make_block(spec, rng), SteeringDirection::a_to_b).value);
        const double err = std::abs(aggregate_subsets(values).value - analytic);
        REQUIRE(err < prev_err + 0.02 * analytic);
        prev_err = err;
        if (m == 7000) REQUIRE(err < 0.02 * analytic);
    }
}

TEST_CASE("crosstalk floor limits: separated, identical, and gapped regions") {
    const ImageGeometry geom{64, 64};
    const Vec2 c = geom.center();
    const CloudDensity density({c, c}, {Vec2{3.0, 3.2}, Vec2{3.0, 3.2}});
    PsfModel psf;

    // Far-separated regions: no kernel reaches both, floor is exactly 1.
    ExplicitPatternSpec far;
    for (int row = 28; row < 36; ++row)
        for (int col = 2; col < 6; ++col) far.a.push_back({col, row});
    for (int row = 28; row < 36; ++row)
        for (int col = 58; col < 62; ++col) far.b.push_back({col, row});
    // Density support must reach the regions; widen the cloud for this case.
    const CloudDensity wide({c, c}, {Vec2{12.0, 12.0}, Vec2{12.0, 12.0}});
    const auto [fa, fb] = make_pattern_masks(geom, far);
    REQUIRE(std::abs(crosstalk_floor(wide, psf, fa, fb) - 1.0) < 1e-9);

    // Identical regions: maximal crosstalk, floor 0.
    const auto [sa, sb] = make_split_masks(geom, SplitOrientation::horizontal, 32, 1);
    REQUIRE(crosstalk_floor(density, psf, sa, sa) < 1e-12);

    // A one-pixel gap between adjacent halves keeps the floor high but below 1.
    const double floor = crosstalk_floor(density, psf, sa, sb);
    REQUIRE(floor > 0.9);
    REQUIRE(floor < 1.0);
    // Symmetric under exchanging the steering direction.
    REQUIRE(std::abs(floor - crosstalk_floor(density, psf, sb, sa)) < 1e-12);
}

TEST_CASE("wineland parameter: coherent baseline and tuned squeezed state") {
    const SpinMoments css = spin_moments(coherent_state(590, 0.5 * kPi, 0.0));
    const WinelandValue w0 = wineland_parameter(css, 590.0);
    REQUIRE(std::abs(w0.xi2 - 1.0) < 1e-9);
    REQUIRE(std::abs(w0.db) < 1e-8);

    const SqueezingSolution sol = tune_squeezing(590, -3.8);
    const DickeState sq = squeezed_state(590, sol.mu, sol.tilt);
    const WinelandValue w = wineland_parameter(spin_moments(sq), 590.0);
    REQUIRE(std::abs(w.db + 3.8) < 0.3);

    // Monte-Carlo route: sampled projections against the exact moments.
    const ExcitationSampler sampler(sq);
    Rng rng(359);
    const int m = 20000;
    std::vector<double> zs(m);
    for (int i = 0; i < m; ++i)
        zs[static_cast<std::size_t>(i)] = sampler.sample(rng) - 295.0;
    const SpinMoments sm = spin_moments(sq);
    const WinelandValue wmc = wineland_parameter(zs, 0.0, sm.polarization(), 590.0);
    const double xi2_se =
        590.0 * variance_standard_error(zs) / (sm.polarization() * sm.polarization());
    REQUIRE(std::abs(wmc.xi2 - w.xi2) < 4.0 * xi2_se);

    SpinMoments unpolarized;
    REQUIRE_THROWS_AS(wineland_parameter(unpolarized, 10.0), Error);
}

TEST_CASE("aggregate_subsets: degenerate and reference values") {
    const std::vector<double> same = {2.0, 2.0, 2.0};
    const Estimate s = aggregate_subsets(same);
    REQUIRE(s.value == 2.0);
    REQUIRE(s.sem == 0.0);

    const std::vector<double> vals = {0.8, 1.0, 1.2};
    const Estimate e = aggregate_subsets(vals);
    REQUIRE(std::abs(e.value - 1.0) < 1e-12);
    REQUIRE(std::abs(e.sem - 0.11547005383792514) < 1e-9);

    REQUIRE_THROWS_AS(aggregate_subsets(std::vector<double>{1.0}), Error);
}

TEST_CASE("uncertainty product is bounded below by one for physical statistics") {
    // Minimum-uncertainty-like synthetic data: Var_z Var_y = (sx/2)^2.
    BlockSpec spec;
    spec.z = {40.0, 40.0, 0.0};
    spec.y = {130.0, 130.0, 0.0};
    spec.sx_a = 2.0 * std::sqrt(40.0 * 130.0);
    spec.sx_b = spec.sx_a;
    Rng rng(367);
    std::vector<double> prods;
    for (int s = 0; s < 40; ++s) prods.push_back(uncertainty_product(make_block(spec, rng), 'B'));
    const Estimate p = aggregate_subsets(prods);
    REQUIRE(p.value >= 1.0 - 4.0 * p.sem);
}
