#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "spinsplit/config.hpp"
#include "spinsplit/criteria.hpp"
#include "spinsplit/dataset.hpp"
#include "spinsplit/dicke.hpp"
#include "spinsplit/errors.hpp"
#include "spinsplit/imaging.hpp"
#include "spinsplit/regions.hpp"
#include "spinsplit/rng.hpp"
#include "spinsplit/rotation.hpp"
#include "spinsplit/state_prep.hpp"
#include "spinsplit/stats.hpp"

namespace spinsplit {

// --- Shot generation ---------------------------------------------------------

struct ShotPlanEntry {
    std::int64_t id = 0;
    int subset = 0;
    Axis axis = Axis::z;
};

// Acquisition order within each subset: +x, -x, y, z.
inline std::vector<ShotPlanEntry> acquisition_plan(const AcquisitionConfig& acq) {
    std::vector<ShotPlanEntry> plan;
    plan.reserve(static_cast<std::size_t>(acq.subsets) * acq.shots_per_subset());
    std::int64_t id = 0;
    for (int s = 0; s < acq.subsets; ++s) {
        for (int i = 0; i < acq.shots_plus_x; ++i) plan.push_back({id++, s, Axis::plus_x});
        for (int i = 0; i < acq.shots_minus_x; ++i) plan.push_back({id++, s, Axis::minus_x});
        for (int i = 0; i < acq.shots_y; ++i) plan.push_back({id++, s, Axis::y});
        for (int i = 0; i < acq.shots_z; ++i) plan.push_back({id++, s, Axis::z});
    }
    return plan;
}

/// Generates shots one at a time. States are immutable and the per-shot
/// random stream is derived from (master seed, shot id), so generation is
/// deterministic and order-independent; rotated states are cached per
/// (atom number, axis) when no shot-to-shot phase noise is configured.
class ShotGenerator {
public:
    explicit ShotGenerator(RunConfig cfg) : cfg_(std::move(cfg)), schedule_(cfg_.seed) {
        cfg_.validate();
        cfg_.resolve_state();
        density_ = std::make_unique<CloudDensity>(cfg_.cloud_density());
        geometry_ok_ = geometry_holds_cloud(*density_, cfg_.geometry);
    }

    const RunConfig& config() const { return cfg_; }

    ShotRecord generate(const ShotPlanEntry& entry) const {
        const std::uint64_t seed = schedule_.shot_seed(static_cast<std::uint64_t>(entry.id));
        Rng rng(seed);

        int n = cfg_.state.n_atoms;
        if (cfg_.state.n_sigma > 0.0) {
            do {
                n = static_cast<int>(std::lround(cfg_.state.n_atoms + cfg_.state.n_sigma * rng.normal()));
            } while (n < 1);
        }

        int k;
        if (cfg_.state.phase_noise_rad > 0.0) {
            DickeState state = base_state(n);
            state = rotate_z(state, cfg_.state.phase_noise_rad * rng.normal());
            state = rotate_to_axis(state, entry.axis);
            k = ExcitationSampler(state).sample(rng);
        } else {
            k = sampler_for(n, entry.axis).sample(rng);
        }

        const std::vector<double> outcomes = assign_outcomes(k, n, rng);
        std::vector<Vec2> positions(outcomes.size());
        for (std::size_t i = 0; i < outcomes.size(); ++i)
            positions[i] = density_->sample(state_index_from_outcome(outcomes[i]), rng);

        ShotRecord rec;
        rec.images = render_shot(positions, outcomes, cfg_.psf, cfg_.noise, cfg_.geometry, rng);
        rec.meta.id = entry.id;
        rec.meta.subset = entry.subset;
        rec.meta.axis = entry.axis;
        rec.meta.seed = seed;
        rec.meta.n_atoms = n;
        rec.meta.excitation_count = k;
        rec.meta.truncation_warning = rec.images.truncation_warning || !geometry_ok_;
        if (cfg_.store_truth) rec.truth = TruthRecord{std::move(positions), outcomes};
        return rec;
    }

private:
    const DickeState& base_state(int n) const {
        auto it = base_cache_.find(n);
        if (it == base_cache_.end()) {
            DickeState s = cfg_.state.kind == StateKind::coherent
                               ? coherent_state(n, cfg_.state.polar, cfg_.state.azimuth)
                               : squeezed_state(n, *cfg_.state.mu, *cfg_.state.tilt_rad);
            it = base_cache_.emplace(n, std::move(s)).first;
        }
        return it->second;
    }

    const ExcitationSampler& sampler_for(int n, Axis axis) const {
        const auto key = std::make_pair(n, static_cast<int>(axis));
        auto it = sampler_cache_.find(key);
        if (it == sampler_cache_.end()) {
            const DickeState rotated = rotate_to_axis(base_state(n), axis);
            it = sampler_cache_.emplace(key, ExcitationSampler(rotated)).first;
        }
        return it->second;
    }

    RunConfig cfg_;
    SeedSchedule schedule_;
    std::unique_ptr<CloudDensity> density_;
    bool geometry_ok_ = true;
    mutable std::map<int, DickeState> base_cache_;
    mutable std::map<std::pair<int, int>, ExcitationSampler> sampler_cache_;
};

using ShotSink = std::function<void(ShotRecord&&)>;

/// Runs the full acquisition protocol, streaming each rendered shot to the sink.
inline RunConfig run_acquisition(const RunConfig& cfg, const ShotSink& sink) {
    ShotGenerator gen(cfg);
    for (const ShotPlanEntry& entry : acquisition_plan(gen.config().acquisition))
        sink(gen.generate(entry));
    return gen.config();
}

/// Streams `n_shots` z-axis shots (projection-noise calibration runs).
inline RunConfig run_z_calibration(const RunConfig& cfg, std::int64_t n_shots,
                                   const ShotSink& sink) {
    ShotGenerator gen(cfg);
    for (std::int64_t i = 0; i < n_shots; ++i)
        sink(gen.generate({i, static_cast<int>(i), Axis::z}));
    return gen.config();
}

inline MemoryDataset simulate_to_memory(const RunConfig& cfg) {
    ShotGenerator gen(cfg);
    MemoryDataset ds(to_json(gen.config()), gen.config().geometry);
    for (const ShotPlanEntry& entry : acquisition_plan(gen.config().acquisition))
        ds.add(gen.generate(entry));
    return ds;
}

inline void simulate_to_dir(const RunConfig& cfg, const std::string& dir) {
    ShotGenerator gen(cfg);
    DatasetWriter writer(dir, to_json(gen.config()), gen.config().geometry,
                         gen.config().store_truth);
    for (const ShotPlanEntry& entry : acquisition_plan(gen.config().acquisition))
        writer.append(gen.generate(entry));
    writer.finalize(gen.config().seed);
}

// --- Dataset summary (one streaming pass) ------------------------------------

/// Per-dataset caches built in a single pass over the shots: ensemble-mean
/// frames (for mask centering), cumulative column/row sums per shot (split
/// masks never need the frames again) and whole-frame totals.
struct DatasetSummary {
    ImageGeometry geometry;
    RunConfig cfg;
    std::int64_t shots = 0;
    std::vector<ShotMeta> metas;
    std::array<std::vector<double>, 2> mean_frame;   // per state, size W*H
    std::array<Vec2, 2> centroid;                    // of the mean frames
    // Cumulative column sums: col_cum[state][shot * (W+1) + c] = sum of columns < c.
    std::array<std::vector<double>, 2> col_cum;
    std::array<std::vector<double>, 2> row_cum;      // same for rows
    std::array<std::vector<double>, 2> totals;       // whole-frame sums per shot

    double column_band_sum(int state, std::int64_t shot, int begin, int end) const {
        const std::size_t base = static_cast<std::size_t>(shot) * (geometry.width + 1);
        return col_cum[static_cast<std::size_t>(state)][base + static_cast<std::size_t>(end)] -
               col_cum[static_cast<std::size_t>(state)][base + static_cast<std::size_t>(begin)];
    }
    double row_band_sum(int state, std::int64_t shot, int begin, int end) const {
        const std::size_t base = static_cast<std::size_t>(shot) * (geometry.height + 1);
        return row_cum[static_cast<std::size_t>(state)][base + static_cast<std::size_t>(end)] -
               row_cum[static_cast<std::size_t>(state)][base + static_cast<std::size_t>(begin)];
    }
};

inline DatasetSummary summarize_dataset(const ShotSource& source) {
    DatasetSummary s;
    s.geometry = source.geometry();
    s.cfg = config_from_json(source.config_json());
    s.shots = source.shot_count();
    require(s.shots > 0, ErrorCategory::domain, "dataset contains no shots");
    const int w = s.geometry.width;
    const int h = s.geometry.height;
    for (int st = 0; st < 2; ++st) {
        s.mean_frame[st].assign(static_cast<std::size_t>(w) * h, 0.0);
        s.col_cum[st].assign(static_cast<std::size_t>(s.shots) * (w + 1), 0.0);
        s.row_cum[st].assign(static_cast<std::size_t>(s.shots) * (h + 1), 0.0);
        s.totals[st].assign(static_cast<std::size_t>(s.shots), 0.0);
    }
    s.metas.reserve(static_cast<std::size_t>(s.shots));

    std::int64_t index = 0;
    source.visit([&](const ShotRecord& rec) {
        s.metas.push_back(rec.meta);
        for (int st = 0; st < 2; ++st) {
            const std::vector<float>& frame = rec.images.frame(st);
            std::vector<double>& mean = s.mean_frame[st];
            std::vector<double> col(static_cast<std::size_t>(w), 0.0);
            std::vector<double> row(static_cast<std::size_t>(h), 0.0);
            for (int r = 0; r < h; ++r) {
                const float* p = frame.data() + static_cast<std::size_t>(r) * w;
                double rsum = 0.0;
                for (int c = 0; c < w; ++c) {
                    const double v = p[c];
                    mean[static_cast<std::size_t>(r) * w + c] += v;
                    col[static_cast<std::size_t>(c)] += v;
                    rsum += v;
                }
                row[static_cast<std::size_t>(r)] = rsum;
            }
            double acc = 0.0;
            const std::size_t cbase = static_cast<std::size_t>(index) * (w + 1);
            for (int c = 0; c < w; ++c) {
                s.col_cum[st][cbase + static_cast<std::size_t>(c)] = acc;
                acc += col[static_cast<std::size_t>(c)];
            }
            s.col_cum[st][cbase + static_cast<std::size_t>(w)] = acc;
            s.totals[st][static_cast<std::size_t>(index)] = acc;
            double racc = 0.0;
            const std::size_t rbase = static_cast<std::size_t>(index) * (h + 1);
            for (int r = 0; r < h; ++r) {
                s.row_cum[st][rbase + static_cast<std::size_t>(r)] = racc;
                racc += row[static_cast<std::size_t>(r)];
            }
            s.row_cum[st][rbase + static_cast<std::size_t>(h)] = racc;
        }
        ++index;
    });

    for (int st = 0; st < 2; ++st) {
        double total = 0.0, mx = 0.0, my = 0.0;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                const double v = s.mean_frame[st][static_cast<std::size_t>(r) * w + c];
                total += v;
                mx += v * (c + 0.5);
                my += v * (r + 0.5);
            }
        require(total > 0.0, ErrorCategory::domain, "dataset mean frame is empty");
        s.centroid[st] = {mx / total, my / total};
        for (double& v : s.mean_frame[st]) v /= static_cast<double>(s.shots);
    }
    return s;
}

// --- Mask construction around the measured centroids --------------------------

// Gap positions are specified as pixel offsets from the per-state density
// centroid (rounded to whole pixels), mirroring mask centering on the
// ensemble-mean images.
struct SplitMaskSet {
    RegionMask a, b;
    SplitOrientation orientation = SplitOrientation::horizontal;
    int offset = 0;
    int width = 1;
    std::array<std::pair<int, int>, 2> a_range;  // per state, [begin, end) along split axis
    std::array<std::pair<int, int>, 2> b_range;
};

inline SplitMaskSet make_centered_split_masks(const DatasetSummary& summary,
                                              SplitOrientation orientation, int offset,
                                              int width) {
    SplitMaskSet out;
    out.orientation = orientation;
    out.offset = offset;
    out.width = width;
    out.a.label = 'A';
    out.b.label = 'B';
    const std::string tag = std::string("split:") + orientation_name(orientation) +
                            ":offset=" + std::to_string(offset) + ":width=" + std::to_string(width);
    out.a.provenance = tag;
    out.b.provenance = tag;
    for (int st = 0; st < 2; ++st) {
        const double along_center = orientation == SplitOrientation::horizontal
                                        ? summary.centroid[st].x
                                        : summary.centroid[st].y;
        // Same pixel-snapping rule as the pattern-mask centering, so the two
        // construction paths agree and centroid jitter around the geometry
        // center cannot flip the per-state gaps onto different columns.
        const int gap_center = static_cast<int>(std::lround(along_center)) + offset;
        auto [ma, mb] = make_split_masks(summary.geometry, orientation, gap_center, width);
        out.a.per_state[st] = ma.per_state[st];
        out.b.per_state[st] = mb.per_state[st];
        const int gap_begin = gap_center - (width - 1) / 2;
        out.a_range[st] = {0, gap_begin};
        out.b_range[st] = {gap_begin + width, orientation == SplitOrientation::horizontal
                                                  ? summary.geometry.width
                                                  : summary.geometry.height};
    }
    return out;
}

inline std::pair<RegionMask, RegionMask> make_centered_pattern_masks(
    const DatasetSummary& summary, const PatternSpec& spec) {
    auto [a, b] = make_pattern_masks(summary.geometry, spec);
    const Vec2 center = summary.geometry.center();
    std::array<int, 2> dx{}, dy{};
    for (int st = 0; st < 2; ++st) {
        dx[st] = static_cast<int>(std::lround(summary.centroid[st].x - center.x));
        dy[st] = static_cast<int>(std::lround(summary.centroid[st].y - center.y));
    }
    RegionMask ta = a.translated_per_state(dx[0], dy[0], dx[1], dy[1]);
    RegionMask tb = b.translated_per_state(dx[0], dy[0], dx[1], dy[1]);
    for (int st = 0; st < 2; ++st)
        require(!ta.grid(st).empty() && !tb.grid(st).empty(), ErrorCategory::domain,
                "pattern mask empty after centering");
    return {std::move(ta), std::move(tb)};
}

// --- Criteria evaluation -------------------------------------------------------

// Per-shot detected counts for one region pair.
struct RegionCounts {
    std::vector<double> a1, a2, b1, b2;  // N_state^region per shot
};

inline RegionCounts counts_for_split(const DatasetSummary& summary, const SplitMaskSet& masks) {
    RegionCounts out;
    const std::size_t n = static_cast<std::size_t>(summary.shots);
    out.a1.resize(n);
    out.a2.resize(n);
    out.b1.resize(n);
    out.b2.resize(n);
    const bool horizontal = masks.orientation == SplitOrientation::horizontal;
    for (std::int64_t i = 0; i < summary.shots; ++i) {
        for (int st = 0; st < 2; ++st) {
            const auto [ab, ae] = masks.a_range[st];
            const auto [bb, be] = masks.b_range[st];
            const double na = horizontal ? summary.column_band_sum(st, i, ab, ae)
                                         : summary.row_band_sum(st, i, ab, ae);
            const double nb = horizontal ? summary.column_band_sum(st, i, bb, be)
                                         : summary.row_band_sum(st, i, bb, be);
            if (st == 0) {
                out.a1[static_cast<std::size_t>(i)] = na;
                out.b1[static_cast<std::size_t>(i)] = nb;
            } else {
                out.a2[static_cast<std::size_t>(i)] = na;
                out.b2[static_cast<std::size_t>(i)] = nb;
            }
        }
    }
    return out;
}

// One streaming pass computing counts for several mask pairs at once.
inline std::vector<RegionCounts> counts_for_mask_sets(
    const ShotSource& source, std::span<const std::pair<RegionMask, RegionMask>> mask_sets) {
    std::vector<RegionCounts> out(mask_sets.size());
    const std::size_t n = static_cast<std::size_t>(source.shot_count());
    for (RegionCounts& rc : out) {
        rc.a1.resize(n);
        rc.a2.resize(n);
        rc.b1.resize(n);
        rc.b2.resize(n);
    }
    std::int64_t i = 0;
    source.visit([&](const ShotRecord& rec) {
        for (std::size_t m = 0; m < mask_sets.size(); ++m) {
            const auto& [ma, mb] = mask_sets[m];
            const auto [a1, a2] = count_atoms(rec.images, ma);
            const auto [b1, b2] = count_atoms(rec.images, mb);
            out[m].a1[static_cast<std::size_t>(i)] = a1;
            out[m].a2[static_cast<std::size_t>(i)] = a2;
            out[m].b1[static_cast<std::size_t>(i)] = b1;
            out[m].b2[static_cast<std::size_t>(i)] = b2;
        }
        ++i;
    });
    return out;
}

/// Criteria pipeline over one dataset. Builds the one-pass summary up front;
/// split-mask evaluations afterwards never touch the frames again.
class Analyzer {
public:
    explicit Analyzer(const ShotSource& source)
        : source_(source), summary_(summarize_dataset(source)) {
        // Density model for the overlap integrals: configured cloud shape,
        // centered on the measured per-state centroids.
        density_ = std::make_unique<CloudDensity>(
            std::array<Vec2, 2>{summary_.centroid[0], summary_.centroid[1]},
            summary_.cfg.cloud.sigma);
        whole_mask_.label = 'W';
        whole_mask_.provenance = "whole";
        whole_mask_.per_state = {detail::full_grid(summary_.geometry, true),
                                 detail::full_grid(summary_.geometry, true)};
        whole_profile_ = std::make_unique<OverlapProfile>(*density_, summary_.cfg.psf, whole_mask_);
    }

    const DatasetSummary& summary() const { return summary_; }
    const CloudDensity& density() const { return *density_; }

    CriteriaReport analyze_split(int offset, int width) const {
        const SplitMaskSet masks =
            make_centered_split_masks(summary_, summary_.cfg.masks.orientation, offset, width);
        return build_report(masks.a, masks.b, counts_for_split(summary_, masks));
    }

    CriteriaReport analyze_pattern(const PatternSpec& spec) const {
        auto masks = make_centered_pattern_masks(summary_, spec);
        const std::array<std::pair<RegionMask, RegionMask>, 1> sets{masks};
        auto counts = counts_for_mask_sets(source_, sets);
        return build_report(masks.first, masks.second, std::move(counts.front()));
    }

    std::vector<CriteriaReport> sweep_gap_position() const {
        std::vector<CriteriaReport> reports;
        for (int offset : summary_.cfg.masks.gap_offsets)
            reports.push_back(analyze_split(offset, summary_.cfg.masks.gap_width));
        return reports;
    }

    // Widths swept around the gap position whose width-1 splitting ratio is
    // closest to the configured target (the steering-optimal ratio).
    std::vector<CriteriaReport> sweep_gap_width() const {
        const int offset = offset_for_ratio(summary_.cfg.masks.width_sweep_ratio);
        std::vector<CriteriaReport> reports;
        for (int width : summary_.cfg.masks.gap_widths)
            reports.push_back(analyze_split(offset, width));
        return reports;
    }

    struct PatternSweepResult {
        std::vector<CriteriaReport> reports;
        std::vector<std::string> diagnostics;  // skipped patterns, one line each
    };

    PatternSweepResult sweep_patterns() const {
        return sweep_patterns(summary_.cfg.masks.patterns);
    }

    PatternSweepResult sweep_patterns(std::span<const PatternSpec> patterns) const {
        PatternSweepResult out;
        std::vector<std::pair<RegionMask, RegionMask>> sets;
        std::vector<std::size_t> pattern_index;
        for (std::size_t i = 0; i < patterns.size(); ++i) {
            try {
                sets.push_back(make_centered_pattern_masks(summary_, patterns[i]));
                pattern_index.push_back(i);
            } catch (const Error& e) {
                out.diagnostics.push_back(pattern_name(patterns[i]) + ": " + e.what());
            }
        }
        auto counts = counts_for_mask_sets(source_, sets);
        for (std::size_t m = 0; m < sets.size(); ++m) {
            try {
                out.reports.push_back(
                    build_report(sets[m].first, sets[m].second, std::move(counts[m])));
            } catch (const Error& e) {
                out.diagnostics.push_back(pattern_name(patterns[pattern_index[m]]) + ": " +
                                          e.what());
            }
        }
        return out;
    }

    int offset_for_ratio(double target_ratio) const {
        double best = 1e9;
        int best_offset = 0;
        for (int offset : summary_.cfg.masks.gap_offsets) {
            const CriteriaReport r = analyze_split(offset, 1);
            if (std::abs(r.splitting_ratio - target_ratio) < best) {
                best = std::abs(r.splitting_ratio - target_ratio);
                best_offset = offset;
            }
        }
        return best_offset;
    }

    // Projection-noise calibration row: local z-spin fluctuations of region A
    // against the eta-corrected atom number, in both normalizations.
    struct CalibrationRow {
        int offset = 0;
        double ratio = 0.0;
        double normalized = 0.0;      // 4 (Var(S^A_z) - Var(Delta^A)) / (N^A / eta)
        double normalized_se = 0.0;
        double raw_ratio = 0.0;       // (Var(N1-N2) - noise) / <N1+N2>
        double raw_ratio_se = 0.0;
        double eta_analytic = 0.0;
        double mean_atoms = 0.0;
    };

    std::vector<CalibrationRow> calibration_curve(std::span<const int> offsets, int width) const {
        std::vector<CalibrationRow> rows;
        for (int offset : offsets) {
            const SplitMaskSet masks =
                make_centered_split_masks(summary_, summary_.cfg.masks.orientation, offset, width);
            const RegionCounts counts = counts_for_split(summary_, masks);
            const OverlapProfile profile(*density_, summary_.cfg.psf, masks.a);
            CalibrationRow row;
            row.offset = offset;
            row.eta_analytic = profile.eta();

            std::vector<double> diff, total, value;
            const std::size_t n = counts.a1.size();
            diff.reserve(n);
            total.reserve(n);
            value.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                if (summary_.metas[i].axis != Axis::z) continue;
                diff.push_back(counts.a1[i] - counts.a2[i]);
                total.push_back(counts.a1[i] + counts.a2[i]);
                value.push_back((counts.a1[i] - counts.a2[i]) / (2.0 * profile.eta()));
            }
            require(diff.size() >= 4, ErrorCategory::domain,
                    "calibration_curve: not enough z shots");
            const double mean_n = mean(total);
            row.mean_atoms = mean_n;

            const double noise_raw = noise_count_variance(masks.a);
            row.raw_ratio = (sample_variance(diff) - noise_raw) / mean_n;
            row.raw_ratio_se = variance_standard_error(diff) / mean_n;

            const double eta = profile.eta();
            const double noise_value = noise_raw / (4.0 * eta * eta);
            const double n_corr = mean_n / eta;
            row.normalized = 4.0 * (sample_variance(value) - noise_value) / n_corr;
            row.normalized_se = 4.0 * variance_standard_error(value) / n_corr;

            // Splitting ratio from mean counts over all shots.
            double a_sum = 0.0, all_sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                a_sum += counts.a1[i] + counts.a2[i];
                all_sum += counts.a1[i] + counts.a2[i] + counts.b1[i] + counts.b2[i];
            }
            row.ratio = a_sum / all_sum;
            rows.push_back(row);
        }
        return rows;
    }

    CriteriaReport build_report(const RegionMask& mask_a, const RegionMask& mask_b,
                                RegionCounts counts) const {
        const OverlapProfile profile_a(*density_, summary_.cfg.psf, mask_a);
        const OverlapProfile profile_b(*density_, summary_.cfg.psf, mask_b);
        const double eta_a = profile_a.eta();
        const double eta_b = profile_b.eta();

        CriteriaReport rep;
        rep.mask_descriptor = mask_a.provenance;
        rep.eta_a = eta_a;
        rep.eta_b = eta_b;
        rep.noise_var_a = noise_count_variance(mask_a) / (4.0 * eta_a * eta_a);
        rep.noise_var_b = noise_count_variance(mask_b) / (4.0 * eta_b * eta_b);

        // Per-subset sample blocks.
        std::vector<SubsetBlock> blocks(static_cast<std::size_t>(count_subsets()));
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            blocks[b].subset_id = static_cast<int>(b);
            blocks[b].noise_var_a = rep.noise_var_a;
            blocks[b].noise_var_b = rep.noise_var_b;
        }
        const double whole_eta = whole_profile_->eta();
        std::vector<std::vector<double>> whole_z(blocks.size());
        std::vector<std::vector<double>> whole_px(blocks.size()), whole_mx(blocks.size());
        double a_sum = 0.0, b_sum = 0.0, n_hat_sum = 0.0;
        for (std::size_t i = 0; i < counts.a1.size(); ++i) {
            const ShotMeta& m = summary_.metas[i];
            SubsetBlock& blk = blocks[static_cast<std::size_t>(m.subset)];
            const double va = (counts.a1[i] - counts.a2[i]) / (2.0 * eta_a);
            const double vb = (counts.b1[i] - counts.b2[i]) / (2.0 * eta_b);
            switch (m.axis) {
                case Axis::plus_x:
                    blk.a_plus_x.push_back(va);
                    blk.b_plus_x.push_back(vb);
                    break;
                case Axis::minus_x:
                    blk.a_minus_x.push_back(va);
                    blk.b_minus_x.push_back(vb);
                    break;
                case Axis::y:
                    blk.a_y.push_back(va);
                    blk.b_y.push_back(vb);
                    break;
                case Axis::z:
                    blk.a_z.push_back(va);
                    blk.b_z.push_back(vb);
                    break;
            }
            a_sum += counts.a1[i] + counts.a2[i];
            b_sum += counts.b1[i] + counts.b2[i];
            const double tot1 = summary_.totals[0][i];
            const double tot2 = summary_.totals[1][i];
            n_hat_sum += tot1 + tot2;
            const double vw = (tot1 - tot2) / (2.0 * whole_eta);
            auto& wz = whole_z[static_cast<std::size_t>(m.subset)];
            if (m.axis == Axis::z) wz.push_back(vw);
            if (m.axis == Axis::plus_x) whole_px[static_cast<std::size_t>(m.subset)].push_back(vw);
            if (m.axis == Axis::minus_x) whole_mx[static_cast<std::size_t>(m.subset)].push_back(vw);
        }

        const double shots_d = static_cast<double>(counts.a1.size());
        rep.mean_atoms_a = a_sum / shots_d;
        rep.mean_atoms_b = b_sum / shots_d;
        rep.splitting_ratio = a_sum / (a_sum + b_sum);
        rep.subsets = static_cast<int>(blocks.size());

        std::vector<double> ent, epr_ab, epr_ba, ni_a, ni_b, xi2, sxa, sxb;
        std::vector<double> viz, viy, viz_raw, viy_raw;
        const double whole_noise = noise_count_variance(whole_mask_) / (4.0 * whole_eta * whole_eta);
        const double n_hat = n_hat_sum / shots_d / whole_eta;
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            const SubsetBlock& blk = blocks[b];
            const CriterionValue e = entanglement_criterion(blk);
            const CriterionValue ab = epr_criterion(blk, SteeringDirection::a_to_b);
            const CriterionValue ba = epr_criterion(blk, SteeringDirection::b_to_a);
            ent.push_back(e.value);
            epr_ab.push_back(ab.value);
            epr_ba.push_back(ba.value);
            ni_a.push_back(uncertainty_product(blk, 'A'));
            ni_b.push_back(uncertainty_product(blk, 'B'));
            rep.gains_ent.push_back(e.gains);
            rep.gains_epr_ab.push_back(ab.gains);
            rep.gains_epr_ba.push_back(ba.gains);
            viz.push_back(ab.var_inf_z);
            viy.push_back(ab.var_inf_y);
            viz_raw.push_back(ab.var_inf_z_raw);
            viy_raw.push_back(ab.var_inf_y_raw);
            sxa.push_back(e.mean_sx_a);
            sxb.push_back(e.mean_sx_b);
            rep.negative_variance_flag |= e.negative_variance || ab.negative_variance;
            rep.gain_fallback_flag |= e.gain_fallback || ab.gain_fallback || ba.gain_fallback;

            // Whole-cloud Wineland parameter for this subset.
            const double sx_whole =
                0.5 * std::abs(mean(whole_px[b]) - mean(whole_mx[b]));
            xi2.push_back(wineland_parameter(whole_z[b], whole_noise, sx_whole, n_hat).xi2);
        }
        rep.e_ent = aggregate_subsets(ent);
        rep.e_epr_ab = aggregate_subsets(epr_ab);
        rep.e_epr_ba = aggregate_subsets(epr_ba);
        rep.noninferred_a = aggregate_subsets(ni_a);
        rep.noninferred_b = aggregate_subsets(ni_b);
        rep.var_inf_z_ab = aggregate_subsets(viz);
        rep.var_inf_y_ab = aggregate_subsets(viy);
        rep.var_inf_z_ab_raw = aggregate_subsets(viz_raw);
        rep.var_inf_y_ab_raw = aggregate_subsets(viy_raw);
        rep.mean_sx_a = mean(sxa);
        rep.mean_sx_b = mean(sxb);
        rep.wineland_db = 10.0 * std::log10(std::max(mean(xi2), 1e-300));

        rep.crosstalk_floor_ab = crosstalk_floor(*density_, summary_.cfg.psf, mask_a, mask_b);
        rep.crosstalk_floor_ba = crosstalk_floor(*density_, summary_.cfg.psf, mask_b, mask_a);
        rep.validate();
        return rep;
    }

private:
    double noise_count_variance(const RegionMask& mask) const {
        // Variance of N1 - N2 inside the mask from detection noise alone.
        const int npix = summary_.geometry.pixel_count();
        return summary_.cfg.noise.pixel_variance(0, npix) * mask.grid(0).pixel_count() +
               summary_.cfg.noise.pixel_variance(1, npix) * mask.grid(1).pixel_count();
    }

    int count_subsets() const {
        int max_subset = 0;
        for (const ShotMeta& m : summary_.metas) max_subset = std::max(max_subset, m.subset);
        return max_subset + 1;
    }

    const ShotSource& source_;
    DatasetSummary summary_;
    std::unique_ptr<CloudDensity> density_;
    RegionMask whole_mask_;
    std::unique_ptr<OverlapProfile> whole_profile_;
};

// --- Truth-record consistency (offline oracle) --------------------------------

struct OracleCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Recomputes region counts from the stored per-atom truth and compares with
/// the image-based counts; the residual must be explained by detection noise.
inline std::vector<OracleCheck> oracle_checks(const ShotSource& source) {
    require(source.has_truth(), ErrorCategory::domain,
            "oracle checks need a dataset with truth records");
    DatasetSummary summary = summarize_dataset(source);
    const RunConfig& cfg = summary.cfg;
    const SplitMaskSet masks =
        make_centered_split_masks(summary, cfg.masks.orientation, 0, cfg.masks.gap_width);

    const int npix = summary.geometry.pixel_count();
    const std::array<double, 2> pixel_var = {cfg.noise.pixel_variance(0, npix),
                                             cfg.noise.pixel_variance(1, npix)};
    std::array<std::vector<double>, 2> residual;  // per state: image count - truth overlap sum
    std::vector<double> total_residual;
    bool outcome_counts_ok = true;
    std::int64_t index = 0;
    source.visit([&](const ShotRecord& rec) {
        const TruthRecord& truth = *rec.truth;
        int ups = 0;
        std::array<double, 2> expected{0.0, 0.0};
        for (std::size_t i = 0; i < truth.positions.size(); ++i) {
            const int st = state_index_from_outcome(truth.outcomes[i]);
            if (st == 1) ++ups;
            expected[static_cast<std::size_t>(st)] += mode_overlap(
                cfg.psf.sigma[static_cast<std::size_t>(st)], masks.a.grid(st), truth.positions[i]);
        }
        outcome_counts_ok &= (ups == rec.meta.excitation_count);
        const auto [a1, a2] = count_atoms(rec.images, masks.a);
        residual[0].push_back(a1 - expected[0]);
        residual[1].push_back(a2 - expected[1]);
        total_residual.push_back(rec.images.frame_sum(0) + rec.images.frame_sum(1) -
                                 static_cast<double>(rec.meta.n_atoms));
        ++index;
    });

    std::vector<OracleCheck> checks;
    checks.push_back({"truth outcome counts match k", outcome_counts_ok,
                      outcome_counts_ok ? "all shots consistent" : "mismatch found"});
    for (int st = 0; st < 2; ++st) {
        const double m = mean(residual[static_cast<std::size_t>(st)]);
        const double expected_var =
            pixel_var[static_cast<std::size_t>(st)] * masks.a.grid(st).pixel_count();
        const double se = std::sqrt(expected_var / static_cast<double>(residual[0].size()));
        const bool mean_ok = std::abs(m) <= 4.0 * std::max(se, 1e-12);
        const double v = sample_variance(residual[static_cast<std::size_t>(st)]);
        const double v_se = variance_standard_error(residual[static_cast<std::size_t>(st)]);
        const bool var_ok = std::abs(v - expected_var) <= 4.0 * std::max(v_se, 1e-12);
        checks.push_back({"region count residual mean (state " + std::to_string(st + 1) + ")",
                          mean_ok,
                          "mean " + std::to_string(m) + ", 4SE " + std::to_string(4.0 * se)});
        checks.push_back({"region count residual variance (state " + std::to_string(st + 1) + ")",
                          var_ok,
                          "var " + std::to_string(v) + " vs noise " + std::to_string(expected_var)});
    }
    const Estimate tot = mean_with_sem(total_residual);
    const double tot_noise_se =
        std::sqrt((cfg.noise.frame_rms[0] * cfg.noise.frame_rms[0] +
                   cfg.noise.frame_rms[1] * cfg.noise.frame_rms[1]) /
                  static_cast<double>(total_residual.size()));
    const bool tot_ok = std::abs(tot.value) <= 4.0 * std::max(tot_noise_se, 1e-12);
    checks.push_back({"detected total equals true atom number", tot_ok,
                      "mean residual " + std::to_string(tot.value)});
    return checks;
}

// --- Report emission -----------------------------------------------------------

inline json to_json(const GainPair& g) { return json{{"g_z", g.g_z}, {"g_y", g.g_y}}; }

inline json to_json(const Estimate& e) { return json{{"value", e.value}, {"sem", e.sem}}; }

inline json to_json(const CriteriaReport& r) {
    json j;
    j["mask"] = r.mask_descriptor;
    j["splitting_ratio"] = r.splitting_ratio;
    j["subsets"] = r.subsets;
    j["e_ent"] = to_json(r.e_ent);
    j["e_epr_ab"] = to_json(r.e_epr_ab);
    j["e_epr_ba"] = to_json(r.e_epr_ba);
    j["noninferred_a"] = to_json(r.noninferred_a);
    j["noninferred_b"] = to_json(r.noninferred_b);
    json gains_ent = json::array(), gains_ab = json::array(), gains_ba = json::array();
    for (const GainPair& g : r.gains_ent) gains_ent.push_back(to_json(g));
    for (const GainPair& g : r.gains_epr_ab) gains_ab.push_back(to_json(g));
    for (const GainPair& g : r.gains_epr_ba) gains_ba.push_back(to_json(g));
    j["gains_ent"] = std::move(gains_ent);
    j["gains_epr_ab"] = std::move(gains_ab);
    j["gains_epr_ba"] = std::move(gains_ba);
    j["var_inf_z_ab"] = to_json(r.var_inf_z_ab);
    j["var_inf_y_ab"] = to_json(r.var_inf_y_ab);
    j["var_inf_z_ab_raw"] = to_json(r.var_inf_z_ab_raw);
    j["var_inf_y_ab_raw"] = to_json(r.var_inf_y_ab_raw);
    j["crosstalk_floor_ab"] = r.crosstalk_floor_ab;
    j["crosstalk_floor_ba"] = r.crosstalk_floor_ba;
    j["wineland_db"] = r.wineland_db;
    j["eta_a"] = r.eta_a;
    j["eta_b"] = r.eta_b;
    j["noise_var_a"] = r.noise_var_a;
    j["noise_var_b"] = r.noise_var_b;
    j["mean_atoms_a"] = r.mean_atoms_a;
    j["mean_atoms_b"] = r.mean_atoms_b;
    j["mean_sx_a"] = r.mean_sx_a;
    j["mean_sx_b"] = r.mean_sx_b;
    j["negative_variance_flag"] = r.negative_variance_flag;
    j["gain_fallback_flag"] = r.gain_fallback_flag;
    return j;
}

inline Estimate estimate_from_json(const json& j) {
    return {j.at("value").get<double>(), j.at("sem").get<double>()};
}

inline CriteriaReport report_from_json(const json& j) {
    CriteriaReport r;
    try {
        r.mask_descriptor = j.at("mask").get<std::string>();
        r.splitting_ratio = j.at("splitting_ratio").get<double>();
        r.subsets = j.at("subsets").get<int>();
        r.e_ent = estimate_from_json(j.at("e_ent"));
        r.e_epr_ab = estimate_from_json(j.at("e_epr_ab"));
        r.e_epr_ba = estimate_from_json(j.at("e_epr_ba"));
        r.noninferred_a = estimate_from_json(j.at("noninferred_a"));
        r.noninferred_b = estimate_from_json(j.at("noninferred_b"));
        for (const json& g : j.at("gains_ent"))
            r.gains_ent.push_back({g.at("g_z").get<double>(), g.at("g_y").get<double>()});
        for (const json& g : j.at("gains_epr_ab"))
            r.gains_epr_ab.push_back({g.at("g_z").get<double>(), g.at("g_y").get<double>()});
        for (const json& g : j.at("gains_epr_ba"))
            r.gains_epr_ba.push_back({g.at("g_z").get<double>(), g.at("g_y").get<double>()});
        r.var_inf_z_ab = estimate_from_json(j.at("var_inf_z_ab"));
        r.var_inf_y_ab = estimate_from_json(j.at("var_inf_y_ab"));
        r.var_inf_z_ab_raw = estimate_from_json(j.at("var_inf_z_ab_raw"));
        r.var_inf_y_ab_raw = estimate_from_json(j.at("var_inf_y_ab_raw"));
        r.crosstalk_floor_ab = j.at("crosstalk_floor_ab").get<double>();
        r.crosstalk_floor_ba = j.at("crosstalk_floor_ba").get<double>();
        r.wineland_db = j.at("wineland_db").get<double>();
        r.eta_a = j.at("eta_a").get<double>();
        r.eta_b = j.at("eta_b").get<double>();
        r.noise_var_a = j.at("noise_var_a").get<double>();
        r.noise_var_b = j.at("noise_var_b").get<double>();
        r.mean_atoms_a = j.at("mean_atoms_a").get<double>();
        r.mean_atoms_b = j.at("mean_atoms_b").get<double>();
        r.mean_sx_a = j.at("mean_sx_a").get<double>();
        r.mean_sx_b = j.at("mean_sx_b").get<double>();
        r.negative_variance_flag = j.at("negative_variance_flag").get<bool>();
        r.gain_fallback_flag = j.at("gain_fallback_flag").get<bool>();
    } catch (const json::exception& e) {
        fail(ErrorCategory::corrupt, std::string("corrupt report record: ") + e.what());
    }
    return r;
}

// RFC-4180 style field quoting.
inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

inline void write_reports_json(const std::string& path, std::span<const CriteriaReport> reports) {
    require(!reports.empty(), ErrorCategory::domain, "no reports to write");
    json arr = json::array();
    for (const CriteriaReport& r : reports) arr.push_back(to_json(r));
    save_json(arr, path);
}

inline std::vector<CriteriaReport> load_reports_json(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCategory::io, "cannot open reports file: " + path);
    json arr;
    try {
        in >> arr;
    } catch (const json::exception& e) {
        fail(ErrorCategory::corrupt, std::string("corrupt reports file: ") + e.what());
    }
    std::vector<CriteriaReport> out;
    for (const json& j : arr) out.push_back(report_from_json(j));
    return out;
}

/// Criteria table, one row per mask configuration. Column meanings:
/// splitting_ratio = N^A/(N^A+N^B); e_* are criterion estimates with their
/// SEM; noninferred_* are the per-region uncertainty products; floors are the
/// analytic crosstalk bounds; flags mark negative noise-subtracted variances
/// or gain fallbacks anywhere in the aggregation.
inline void write_criteria_csv(const std::string& path, std::span<const CriteriaReport> reports) {
    require(!reports.empty(), ErrorCategory::domain, "no reports to write");
    std::ofstream out(path);
    require(out.good(), ErrorCategory::io, "cannot write CSV: " + path);
    out << "mask,splitting_ratio,subsets,e_ent,e_ent_sem,e_epr_ab,e_epr_ab_sem,"
           "e_epr_ba,e_epr_ba_sem,noninferred_a,noninferred_a_sem,noninferred_b,"
           "noninferred_b_sem,crosstalk_floor_ab,crosstalk_floor_ba,wineland_db,"
           "eta_a,eta_b,mean_atoms_a,mean_atoms_b,mean_sx_a,mean_sx_b,"
           "negative_variance_flag,gain_fallback_flag\n";
    out.precision(12);
    for (const CriteriaReport& r : reports) {
        out << csv_escape(r.mask_descriptor) << ',' << r.splitting_ratio << ',' << r.subsets << ','
            << r.e_ent.value << ',' << r.e_ent.sem << ',' << r.e_epr_ab.value << ','
            << r.e_epr_ab.sem << ',' << r.e_epr_ba.value << ',' << r.e_epr_ba.sem << ','
            << r.noninferred_a.value << ',' << r.noninferred_a.sem << ',' << r.noninferred_b.value
            << ',' << r.noninferred_b.sem << ',' << r.crosstalk_floor_ab << ','
            << r.crosstalk_floor_ba << ',' << r.wineland_db << ',' << r.eta_a << ',' << r.eta_b
            << ',' << r.mean_atoms_a << ',' << r.mean_atoms_b << ',' << r.mean_sx_a << ','
            << r.mean_sx_b << ',' << (r.negative_variance_flag ? 1 : 0) << ','
            << (r.gain_fallback_flag ? 1 : 0) << '\n';
    }
    require(out.good(), ErrorCategory::io, "CSV write failed: " + path);
}

/// Region atom numbers against gap width (the width-sweep companion table).
inline void write_atoms_csv(const std::string& path, std::span<const CriteriaReport> reports) {
    require(!reports.empty(), ErrorCategory::domain, "no reports to write");
    std::ofstream out(path);
    require(out.good(), ErrorCategory::io, "cannot write CSV: " + path);
    out << "mask,mean_atoms_a,mean_atoms_b\n";
    out.precision(12);
    for (const CriteriaReport& r : reports)
        out << csv_escape(r.mask_descriptor) << ',' << r.mean_atoms_a << ',' << r.mean_atoms_b
            << '\n';
    require(out.good(), ErrorCategory::io, "CSV write failed: " + path);
}

/// Projection-noise calibration table: normalized and raw local spin
/// fluctuations against the splitting ratio, with the analytic eta curve.
inline void write_calibration_csv(const std::string& path,
                                  std::span<const Analyzer::CalibrationRow> rows) {
    require(!rows.empty(), ErrorCategory::domain, "no calibration rows to write");
    std::ofstream out(path);
    require(out.good(), ErrorCategory::io, "cannot write CSV: " + path);
    out << "offset,splitting_ratio,normalized_variance,normalized_variance_se,"
           "raw_ratio,raw_ratio_se,eta_analytic,mean_atoms\n";
    out.precision(12);
    for (const auto& r : rows)
        out << r.offset << ',' << r.ratio << ',' << r.normalized << ',' << r.normalized_se << ','
            << r.raw_ratio << ',' << r.raw_ratio_se << ',' << r.eta_analytic << ','
            << r.mean_atoms << '\n';
    require(out.good(), ErrorCategory::io, "CSV write failed: " + path);
}

}  // namespace spinsplit
