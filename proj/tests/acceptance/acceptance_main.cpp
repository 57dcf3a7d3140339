// Acceptance suite: end-to-end checks of the full simulation + analysis
// pipeline at experimental scale. Each criterion prints one PASS/FAIL line
// with its measured margins; the process exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "spinsplit/harness.hpp"

using namespace spinsplit;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Reporting scaffold

struct Checker {
    bool ok = true;
    std::ostringstream detail;

    void check(bool condition, const std::string& what) {
        if (!condition) {
            ok = false;
            detail << "  FAILED: " << what << '\n';
        }
    }
    void note(const std::string& line) { detail << "  " << line << '\n'; }
};

int g_failures = 0;

void run_criterion(int id, const std::string& name, const std::function<void(Checker&)>& body) {
    Checker c;
    const auto start = std::chrono::steady_clock::now();
    try {
        body(c);
    } catch (const std::exception& e) {
        c.ok = false;
        c.detail << "  exception: " << e.what() << '\n';
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] criterion %d: %s (%.1f s)\n", c.ok ? "PASS" : "FAIL", id, name.c_str(),
                secs);
    std::fputs(c.detail.str().c_str(), stdout);
    std::fflush(stdout);
    if (!c.ok) ++g_failures;
}

// ---------------------------------------------------------------------------
// Shot source that renders on the fly (nothing stored), for runs whose frames
// would not fit in memory. Visits regenerate identical shots from the seeds.

class GeneratedSource : public ShotSource {
public:
    GeneratedSource(const RunConfig& cfg, std::vector<ShotPlanEntry> plan)
        : generator_(cfg), plan_(std::move(plan)), config_(to_json(generator_.config())) {}

    static GeneratedSource z_calibration(RunConfig cfg, std::int64_t shots) {
        std::vector<ShotPlanEntry> plan;
        plan.reserve(static_cast<std::size_t>(shots));
        for (std::int64_t i = 0; i < shots; ++i)
            plan.push_back({i, static_cast<int>(i % 64), Axis::z});
        return GeneratedSource(cfg, std::move(plan));
    }

    const json& config_json() const override { return config_; }
    ImageGeometry geometry() const override { return generator_.config().geometry; }
    std::int64_t shot_count() const override { return static_cast<std::int64_t>(plan_.size()); }
    bool has_truth() const override { return generator_.config().store_truth; }
    void visit(const std::function<void(const ShotRecord&)>& fn) const override {
        for (const ShotPlanEntry& e : plan_) fn(generator_.generate(e));
    }

private:
    ShotGenerator generator_;
    std::vector<ShotPlanEntry> plan_;
    json config_;
};

// ---------------------------------------------------------------------------
// Default experiment-scale configurations.

RunConfig experiment_config(StateKind kind, std::uint64_t seed) {
    RunConfig cfg;
    cfg.state.kind = kind;
    cfg.seed = seed;
    return cfg;  // N = 590 +- 30, 64x80 px, 4/4/70/60 x 40 subsets
}

const CriteriaReport& report_nearest_ratio(const std::vector<CriteriaReport>& reports,
                                           double ratio) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < reports.size(); ++i)
        if (std::abs(reports[i].splitting_ratio - ratio) <
            std::abs(reports[best].splitting_ratio - ratio))
            best = i;
    return reports[best];
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Criterion 1: coherent-state projection-noise calibration. >= 1e4 rendered
// shots; 4 Var(S^A_z)/(N^A/eta) = 1.00 +- 0.02 across splitting ratios in
// [0.3, 0.9].

void criterion_1(Checker& c) {
    RunConfig cfg = experiment_config(StateKind::coherent, 0xC0FFEE01);
    cfg.store_truth = false;
    const GeneratedSource source = GeneratedSource::z_calibration(cfg, 50000);
    const Analyzer analyzer(source);
    const std::vector<int> offsets = {-2, -1, 0, 1, 2, 3, 4};
    const auto rows = analyzer.calibration_curve(offsets, 1);
    int in_range = 0;
    for (const auto& row : rows) {
        if (row.ratio < 0.3 || row.ratio > 0.9) continue;
        ++in_range;
        const double dev = std::abs(row.normalized - 1.0);
        c.note("ratio " + fmt(row.ratio) + ": normalized variance " + fmt(row.normalized) +
               " +- " + fmt(row.normalized_se) + " (|dev| " + fmt(dev) + ")");
        c.check(dev <= 0.02, "normalized variance within 0.02 of 1 at ratio " + fmt(row.ratio));
    }
    c.check(in_range >= 4, "at least 4 sweep points inside the [0.3, 0.9] ratio band");
}

// ---------------------------------------------------------------------------
// Criterion 2: analytic eta against Monte-Carlo position sampling, within 1%
// at every gap position. Coherent-state outcome statistics integrate out
// exactly, so the raw fluctuation ratio is E[sum f^2]/E[sum f] over positions;
// the Monte-Carlo side evaluates f with independent closed-form rectangle
// masses rather than the library's run decomposition.

void criterion_2(Checker& c) {
    RunConfig cfg = experiment_config(StateKind::coherent, 0xC0FFEE02);
    // State-independent geometry isolates the single-density overlap integral.
    cfg.cloud.sigma = {Vec2{3.0, 3.2}, Vec2{3.0, 3.2}};
    cfg.psf.sigma = {Vec2{1.4, 2.0}, Vec2{1.4, 2.0}};
    const ImageGeometry geom = cfg.geometry;
    const CloudDensity density = cfg.cloud_density();

    const double inv_sx = 1.0 / (1.4 * std::sqrt(2.0));
    const double inv_sy = 1.0 / (2.0 * std::sqrt(2.0));
    auto mass_x = [&](double lo, double hi, double x) {
        return 0.5 * (std::erf((hi - x) * inv_sx) - std::erf((lo - x) * inv_sx));
    };

    Rng rng(0xC0FFEE03);
    const int shots = 4000;
    const int atoms = 590;
    const std::vector<int> offsets = {-4, -3, -2, -1, 0, 1, 2, 3, 4};
    std::vector<double> sum_f(offsets.size(), 0.0), sum_f2(offsets.size(), 0.0);
    for (int s = 0; s < shots; ++s) {
        for (int i = 0; i < atoms; ++i) {
            const Vec2 p = density.sample(1, rng);
            const double fy =
                0.5 * (std::erf((geom.height - p.y) * inv_sy) - std::erf((0.0 - p.y) * inv_sy));
            for (std::size_t m = 0; m < offsets.size(); ++m) {
                const double gap_begin = 32.0 + offsets[m];  // region A spans [0, gap)
                const double f = mass_x(0.0, gap_begin, p.x) * fy;
                sum_f[m] += f;
                sum_f2[m] += f * f;
            }
        }
    }

    DatasetSummary summary;  // only geometry/config/centroids feed mask building
    summary.geometry = geom;
    summary.cfg = cfg;
    summary.centroid = {geom.center(), geom.center()};
    for (std::size_t m = 0; m < offsets.size(); ++m) {
        const SplitMaskSet masks =
            make_centered_split_masks(summary, SplitOrientation::horizontal, offsets[m], 1);
        const OverlapProfile profile(density, cfg.psf, masks.a);
        const double analytic = profile.eta();
        const double mc = sum_f2[m] / sum_f[m];
        c.note("offset " + std::to_string(offsets[m]) + ": analytic " + fmt(analytic) + ", MC " +
               fmt(mc));
        c.check(std::abs(mc - analytic) <= 0.01 * analytic,
                "eta within 1% at offset " + std::to_string(offsets[m]));
    }
}

// ---------------------------------------------------------------------------
// Criterion 3: analytic crosstalk floor with the experiment geometry: at a
// 1 px gap the floor stays at or above 0.94 across intermediate splitting
// ratios, and a 10 px gap pushes it to 1 within 1e-6.

void criterion_3(Checker& c) {
    const RunConfig cfg = experiment_config(StateKind::coherent, 1);
    const CloudDensity density = cfg.cloud_density();
    for (int offset : {-3, -2, -1, 0, 1, 2, 3}) {
        const auto [a, b] =
            make_split_masks(cfg.geometry, SplitOrientation::horizontal, 32 + offset, 1);
        const double floor = crosstalk_floor(density, cfg.psf, a, b);
        c.note("offset " + std::to_string(offset) + ": floor " + fmt(floor));
        c.check(floor >= 0.94, "floor >= 0.94 at offset " + std::to_string(offset));
    }
    const auto [wa, wb] = make_split_masks(cfg.geometry, SplitOrientation::horizontal, 32, 10);
    const double wide_floor = crosstalk_floor(density, cfg.psf, wa, wb);
    c.note("10 px gap: floor " + fmt(wide_floor));
    c.check(std::abs(wide_floor - 1.0) <= 1e-6, "10 px gap floor equals 1 within 1e-6");
}

// ---------------------------------------------------------------------------
// Criteria 4 and 5 share one squeezed dataset (40 subsets, 5520 shots).

struct SqueezedRun {
    fs::path dir;
    std::vector<CriteriaReport> position_reports;
    std::vector<CriteriaReport> width_reports;
};

SqueezedRun g_squeezed;

void criterion_4(Checker& c) {
    RunConfig cfg = experiment_config(StateKind::squeezed, 0xC0FFEE04);
    cfg.store_truth = false;
    cfg.resolve_state();
    const double tuned_db = best_squeezing_db(cfg.state.n_atoms, *cfg.state.mu);
    c.note("tuned twist mu " + fmt(*cfg.state.mu) + " -> " + fmt(tuned_db) + " dB");
    c.check(std::abs(tuned_db + 3.8) <= 0.3, "tuned squeezing within -3.8 +- 0.3 dB");

    g_squeezed.dir = fs::temp_directory_path() / "spinsplit_acceptance_squeezed";
    fs::remove_all(g_squeezed.dir);
    simulate_to_dir(cfg, g_squeezed.dir.string());
    const DatasetReader reader(g_squeezed.dir.string());
    const Analyzer analyzer(reader);
    g_squeezed.position_reports = analyzer.sweep_gap_position();
    g_squeezed.width_reports = analyzer.sweep_gap_width();

    const CriteriaReport& at_half = report_nearest_ratio(g_squeezed.position_reports, 0.5);
    const double ent_margin = (1.0 - at_half.e_ent.value) / at_half.e_ent.sem;
    c.note("ratio " + fmt(at_half.splitting_ratio) + ": E_ent " + fmt(at_half.e_ent.value) +
           " +- " + fmt(at_half.e_ent.sem) + " (" + fmt(ent_margin) + " SEM below 1), floor " +
           fmt(at_half.crosstalk_floor_ab));
    c.check(ent_margin > 5.0, "entanglement criterion below 1 by more than 5 SEM");
    c.check(at_half.e_ent.value < at_half.crosstalk_floor_ab,
            "entanglement value below the crosstalk floor");

    const CriteriaReport& at_04 = report_nearest_ratio(g_squeezed.position_reports, 0.40);
    const double epr_margin = (1.0 - at_04.e_epr_ab.value) / at_04.e_epr_ab.sem;
    c.note("ratio " + fmt(at_04.splitting_ratio) + ": E_epr(A->B) " +
           fmt(at_04.e_epr_ab.value) + " +- " + fmt(at_04.e_epr_ab.sem) + " (" +
           fmt(epr_margin) + " SEM below 1), floor " + fmt(at_04.crosstalk_floor_ab));
    c.check(epr_margin > 3.0, "steering criterion below 1 by more than 3 SEM");
    c.check(at_04.e_epr_ab.value < at_04.crosstalk_floor_ab,
            "steering value below the crosstalk floor");

    const double ni_margin = at_04.noninferred_b.value - (1.0 - 4.0 * at_04.noninferred_b.sem);
    c.note("non-inferred product (steered region) " + fmt(at_04.noninferred_b.value) + " +- " +
           fmt(at_04.noninferred_b.sem));
    c.check(ni_margin >= 0.0, "non-inferred uncertainty product stays >= 1 - 4 SEM");
    c.note("measured squeezing " + fmt(at_04.wineland_db) + " dB");
    c.check(std::abs(at_04.wineland_db + 3.8) <= 0.3, "measured squeezing within -3.8 +- 0.3 dB");
}

void criterion_5(Checker& c) {
    c.check(!g_squeezed.width_reports.empty(), "width sweep available from criterion 4");
    if (g_squeezed.width_reports.empty()) return;
    const auto& reports = g_squeezed.width_reports;
    const double atoms_b_ref = reports.front().mean_atoms_b;

    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        const int width = static_cast<int>(i) + 1;
        const double kept = r.mean_atoms_b / atoms_b_ref;
        const double margin = (1.0 - r.e_epr_ab.value) / r.e_epr_ab.sem;
        c.note("width " + std::to_string(width) + ": E_epr(A->B) " + fmt(r.e_epr_ab.value) +
               " +- " + fmt(r.e_epr_ab.sem) + ", N_B kept " + fmt(kept));
        if (width <= 3)
            c.check(r.e_epr_ab.value < 1.0,
                    "steering persists at width " + std::to_string(width));
        if (kept < 0.4)
            c.check(margin <= 3.0, "violation lost once > 60% of region B's atoms are removed "
                                   "(width " + std::to_string(width) + ")");
    }
    bool any_depleted = false;
    for (const auto& r : reports) any_depleted |= r.mean_atoms_b / atoms_b_ref < 0.4;
    c.check(any_depleted, "width sweep reaches > 60% depletion of region B");
    fs::remove_all(g_squeezed.dir);
}

// ---------------------------------------------------------------------------
// Criterion 6: coherent-state null control through the full pipeline; no
// criterion below 1 by more than 3 SEM at any splitting ratio.

void criterion_6(Checker& c) {
    RunConfig cfg = experiment_config(StateKind::coherent, 0xC0FFEE06);
    cfg.store_truth = false;
    const fs::path dir = fs::temp_directory_path() / "spinsplit_acceptance_css";
    fs::remove_all(dir);
    simulate_to_dir(cfg, dir.string());
    const DatasetReader reader(dir.string());
    const Analyzer analyzer(reader);
    const auto reports = analyzer.sweep_gap_position();
    for (const CriteriaReport& r : reports) {
        const double m_ent = (1.0 - r.e_ent.value) / r.e_ent.sem;
        const double m_ab = (1.0 - r.e_epr_ab.value) / r.e_epr_ab.sem;
        const double m_ba = (1.0 - r.e_epr_ba.value) / r.e_epr_ba.sem;
        c.note("ratio " + fmt(r.splitting_ratio) + ": E_ent " + fmt(r.e_ent.value) + " (" +
               fmt(m_ent) + " SEM), E_ab " + fmt(r.e_epr_ab.value) + " (" + fmt(m_ab) +
               " SEM), E_ba " + fmt(r.e_epr_ba.value) + " (" + fmt(m_ba) + " SEM)");
        c.check(m_ent <= 3.0, "no fake entanglement at ratio " + fmt(r.splitting_ratio));
        c.check(m_ab <= 3.0, "no fake A->B steering at ratio " + fmt(r.splitting_ratio));
        c.check(m_ba <= 3.0, "no fake B->A steering at ratio " + fmt(r.splitting_ratio));
    }
    fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Criterion 7: exchangeable-moment formulas against exhaustive 2^N brute force
// and against 1e5-shot Monte-Carlo sampling.

DickeState random_state(int n, Rng& rng) {
    std::vector<Complex> amps(static_cast<std::size_t>(n) + 1);
    double norm2 = 0.0;
    for (auto& a : amps) {
        a = Complex(rng.normal(), rng.normal());
        norm2 += std::norm(a);
    }
    for (auto& a : amps) a /= std::sqrt(norm2);
    return DickeState(n, std::move(amps));
}

PartitionedMoments enumerate_partitioned(const DickeState& state, const std::vector<double>& wa,
                                         const std::vector<double>& wb) {
    const int n = state.n_atoms();
    const auto amps = state.amplitudes();
    std::vector<double> binom(static_cast<std::size_t>(n) + 1, 1.0);
    for (int k = 1; k <= n; ++k)
        binom[static_cast<std::size_t>(k)] =
            binom[static_cast<std::size_t>(k - 1)] * (n - k + 1) / static_cast<double>(k);
    PartitionedMoments out;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (unsigned string = 0; string < (1u << n); ++string) {
        int k = 0;
        double va = 0.0, vb = 0.0;
        for (int i = 0; i < n; ++i) {
            const double s = ((string >> i) & 1u) ? 0.5 : -0.5;
            k += ((string >> i) & 1u) ? 1 : 0;
            va += wa[static_cast<std::size_t>(i)] * s;
            vb += wb[static_cast<std::size_t>(i)] * s;
        }
        const double p =
            std::norm(amps[static_cast<std::size_t>(k)]) / binom[static_cast<std::size_t>(k)];
        out.mean_a += p * va;
        out.mean_b += p * vb;
        saa += p * va * va;
        sbb += p * vb * vb;
        sab += p * va * vb;
    }
    out.var_a = saa - out.mean_a * out.mean_a;
    out.var_b = sbb - out.mean_b * out.mean_b;
    out.cov_ab = sab - out.mean_a * out.mean_b;
    return out;
}

void criterion_7(Checker& c) {
    Rng rng(0xC0FFEE07);
    for (int n : {2, 4, 6, 8}) {
        const DickeState state = random_state(n, rng);
        std::vector<double> wa(static_cast<std::size_t>(n)), wb(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            wa[static_cast<std::size_t>(i)] = rng.uniform();
            wb[static_cast<std::size_t>(i)] =
                rng.uniform() * (1.0 - wa[static_cast<std::size_t>(i)]);
        }
        const PartitionedMoments exact = partitioned_moments_exact(state, wa, wb);
        const PartitionedMoments brute = enumerate_partitioned(state, wa, wb);
        const double dev = std::max({std::abs(exact.mean_a - brute.mean_a),
                                     std::abs(exact.var_a - brute.var_a),
                                     std::abs(exact.var_b - brute.var_b),
                                     std::abs(exact.cov_ab - brute.cov_ab)});
        c.note("N=" + std::to_string(n) + ": max |exact - brute force| " + fmt(dev * 1e12) +
               "e-12");
        c.check(dev <= 1e-9, "exchangeable moments match 2^N brute force at N=" +
                                 std::to_string(n));

        const ExcitationSampler sampler(state);
        const int shots = 100000;
        std::vector<double> va(shots), vb(shots);
        for (int s = 0; s < shots; ++s) {
            const int k = sampler.sample(rng);
            const auto outcomes = assign_outcomes(k, n, rng);
            double sa = 0.0, sb = 0.0;
            for (int i = 0; i < n; ++i) {
                sa += wa[static_cast<std::size_t>(i)] * outcomes[static_cast<std::size_t>(i)];
                sb += wb[static_cast<std::size_t>(i)] * outcomes[static_cast<std::size_t>(i)];
            }
            va[static_cast<std::size_t>(s)] = sa;
            vb[static_cast<std::size_t>(s)] = sb;
        }
        const Estimate ma = mean_with_sem(va);
        c.check(std::abs(ma.value - exact.mean_a) <= 4.0 * ma.sem,
                "Monte-Carlo mean within 4 SE at N=" + std::to_string(n));
        c.check(std::abs(sample_variance(va) - exact.var_a) <=
                    4.0 * variance_standard_error(va),
                "Monte-Carlo Var(A) within 4 SE at N=" + std::to_string(n));
        c.check(std::abs(sample_variance(vb) - exact.var_b) <=
                    4.0 * variance_standard_error(vb),
                "Monte-Carlo Var(B) within 4 SE at N=" + std::to_string(n));
        c.check(std::abs(sample_covariance(va, vb) - exact.cov_ab) <=
                    4.0 * covariance_standard_error(va, vb),
                "Monte-Carlo Cov(A,B) within 4 SE at N=" + std::to_string(n));
    }
}

// ---------------------------------------------------------------------------
// Criterion 8: the m-2 inferred-variance normalization is unbiased over 1e4
// synthetic subsets, and the m-1 normalization demonstrably is not. The
// m-1 bias is exactly 1/(m-1), so the demonstration uses m = 20 (5.3% bias
// against the 2% gate); m = 70 additionally shows the bias at many standard
// errors even where it is smaller than 2%.

void criterion_8(Checker& c) {
    const double var_a = 4.0, var_b = 9.0, cov = -2.0;
    const double truth = var_b - cov * cov / var_a;
    Rng rng(0xC0FFEE08);
    for (int m : {20, 70}) {
        const int reps = 10000;
        std::vector<double> est_m2(reps), est_m1(reps);
        std::vector<double> a(static_cast<std::size_t>(m)), b(static_cast<std::size_t>(m));
        for (int r = 0; r < reps; ++r) {
            for (int i = 0; i < m; ++i) {
                const double u = rng.normal();
                const double w = rng.normal();
                a[static_cast<std::size_t>(i)] = std::sqrt(var_a) * u;
                b[static_cast<std::size_t>(i)] =
                    cov / std::sqrt(var_a) * u + std::sqrt(var_b - cov * cov / var_a) * w;
            }
            const double g = optimal_gain(a, b, 0.0).g;
            const double v = inferred_variance(a, b, g);
            est_m2[static_cast<std::size_t>(r)] = v;
            est_m1[static_cast<std::size_t>(r)] = v * (m - 2) / (m - 1);
        }
        const Estimate m2 = mean_with_sem(est_m2);
        const Estimate m1 = mean_with_sem(est_m1);
        const double dev_m2 = std::abs(m2.value - truth) / truth;
        const double dev_m1 = std::abs(m1.value - truth) / truth;
        c.note("m=" + std::to_string(m) + ": m-2 estimator off by " + fmt(100.0 * dev_m2) +
               "%, m-1 off by " + fmt(100.0 * dev_m1) + "%");
        c.check(dev_m2 <= 0.02, "m-2 estimator within 2% at m=" + std::to_string(m));
        if (m == 20)
            c.check(dev_m1 > 0.02, "m-1 normalization fails the 2% gate at m=20");
        c.check(truth - m1.value > 4.0 * m1.sem,
                "m-1 bias resolved at > 4 standard errors at m=" + std::to_string(m));
    }
}

// ---------------------------------------------------------------------------
// Criterion 9: photon-scattering blur formula; zero at zero pulse length, and
// the inverted saturation closes the quadrature sum to the 1.4 px total.

void criterion_9(Checker& c) {
    c.check(blur_rms(rb87::kLinewidth, 1.3, rb87::kRecoilVelocity, 0.0) == 0.0,
            "blur vanishes at zero pulse length");
    const double optical = kOpticalPsfHorPx * kPixelSizeM;
    const double total = kTotalPsfHorPx * kPixelSizeM;
    const double target = std::sqrt(total * total - optical * optical);
    const double s =
        saturation_for_blur(target, rb87::kLinewidth, rb87::kRecoilVelocity, kImagingPulseS);
    const double blur = blur_rms(rb87::kLinewidth, s, rb87::kRecoilVelocity, kImagingPulseS);
    const double combined_px = std::sqrt(optical * optical + blur * blur) / kPixelSizeM;
    c.note("inverted saturation s = " + fmt(s) + ", combined width " + fmt(combined_px) + " px");
    c.check(std::abs(combined_px - kTotalPsfHorPx) <= 0.05,
            "combined width within 0.05 px of 1.4 px");
}

}  // namespace

int main() {
    std::printf("acceptance suite: synthetic split-cloud spin-correlation pipeline\n");
    run_criterion(1, "coherent-state projection-noise calibration", criterion_1);
    run_criterion(2, "analytic eta vs Monte-Carlo position sampling", criterion_2);
    run_criterion(3, "crosstalk floor bounds", criterion_3);
    run_criterion(4, "squeezed-state entanglement and steering", criterion_4);
    run_criterion(5, "steering robustness against gap width", criterion_5);
    run_criterion(6, "coherent-state null control", criterion_6);
    run_criterion(7, "exchangeable-moment oracle equivalence", criterion_7);
    run_criterion(8, "inferred-variance estimator normalization", criterion_8);
    run_criterion(9, "photon-scattering blur formula", criterion_9);
    if (g_failures == 0)
        std::printf("all 9 criteria passed\n");
    else
        std::printf("%d criterion(s) FAILED\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
