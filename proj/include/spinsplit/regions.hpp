#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "spinsplit/errors.hpp"
#include "spinsplit/imaging.hpp"
#include "spinsplit/rotation.hpp"

namespace spinsplit {

/// Boolean pixel grid with a per-row run decomposition, so that the Gaussian
/// kernel mass inside the mask reduces to a few error-function evaluations
/// per row instead of one per pixel.
class MaskGrid {
public:
    MaskGrid() = default;

    MaskGrid(int width, int height, std::vector<std::uint8_t> cells)
        : width_(width), height_(height), cells_(std::move(cells)) {
        require(width_ > 0 && height_ > 0 &&
                    cells_.size() == static_cast<std::size_t>(width_) * height_,
                ErrorCategory::domain, "MaskGrid: bad dimensions");
        rebuild_runs();
    }

    int width() const { return width_; }
    int height() const { return height_; }
    bool at(int col, int row) const {
        return cells_[static_cast<std::size_t>(row) * width_ + col] != 0;
    }
    const std::vector<std::uint8_t>& cells() const { return cells_; }

    int pixel_count() const { return pixel_count_; }
    bool empty() const { return pixel_count_ == 0; }

    bool overlaps(const MaskGrid& other) const {
        require(width_ == other.width_ && height_ == other.height_, ErrorCategory::domain,
                "MaskGrid::overlaps: geometry mismatch");
        for (std::size_t i = 0; i < cells_.size(); ++i)
            if (cells_[i] && other.cells_[i]) return true;
        return false;
    }

    // Translate by whole pixels; cells shifted outside the grid are dropped.
    MaskGrid translated(int dx, int dy) const {
        std::vector<std::uint8_t> cells(cells_.size(), 0);
        for (int row = 0; row < height_; ++row) {
            const int src_row = row - dy;
            if (src_row < 0 || src_row >= height_) continue;
            for (int col = 0; col < width_; ++col) {
                const int src_col = col - dx;
                if (src_col < 0 || src_col >= width_) continue;
                cells[static_cast<std::size_t>(row) * width_ + col] =
                    cells_[static_cast<std::size_t>(src_row) * width_ + src_col];
            }
        }
        return MaskGrid(width_, height_, std::move(cells));
    }

    struct Run {
        int row;
        int col_begin;
        int col_end;  // exclusive
    };
    const std::vector<Run>& runs() const { return runs_; }

    // Row index range covered by the mask.
    int row_begin() const { return row_begin_; }
    int row_end() const { return row_end_; }

    double sum_frame(const std::vector<float>& frame) const {
        double s = 0.0;
        for (const Run& r : runs_) {
            const float* p = frame.data() + static_cast<std::size_t>(r.row) * width_;
            for (int c = r.col_begin; c < r.col_end; ++c) s += p[c];
        }
        return s;
    }

private:
    void rebuild_runs() {
        runs_.clear();
        pixel_count_ = 0;
        row_begin_ = height_;
        row_end_ = 0;
        for (int row = 0; row < height_; ++row) {
            const std::uint8_t* p = cells_.data() + static_cast<std::size_t>(row) * width_;
            int col = 0;
            while (col < width_) {
                if (!p[col]) {
                    ++col;
                    continue;
                }
                int end = col;
                while (end < width_ && p[end]) ++end;
                runs_.push_back({row, col, end});
                pixel_count_ += end - col;
                row_begin_ = std::min(row_begin_, row);
                row_end_ = std::max(row_end_, row + 1);
                col = end;
            }
        }
        if (pixel_count_ == 0) {
            row_begin_ = 0;
            row_end_ = 0;
        }
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> cells_;
    std::vector<Run> runs_;
    int pixel_count_ = 0;
    int row_begin_ = 0;
    int row_end_ = 0;
};

/// An analysis region: one pixel set per internal state (the per-state grids
/// track per-state mask centering) plus a provenance descriptor.
struct RegionMask {
    char label = 'A';
    std::array<MaskGrid, 2> per_state;  // index 0 -> |1>, 1 -> |2>
    std::string provenance;

    const MaskGrid& grid(int state) const { return per_state[static_cast<std::size_t>(state)]; }

    RegionMask translated_per_state(int dx1, int dy1, int dx2, int dy2) const {
        RegionMask out;
        out.label = label;
        out.provenance = provenance;
        out.per_state[0] = per_state[0].translated(dx1, dy1);
        out.per_state[1] = per_state[1].translated(dx2, dy2);
        return out;
    }
};

enum class SplitOrientation { horizontal, vertical };

inline const char* orientation_name(SplitOrientation o) {
    return o == SplitOrientation::horizontal ? "horizontal" : "vertical";
}

namespace detail {

inline MaskGrid full_grid(const ImageGeometry& g, bool value) {
    return MaskGrid(g.width, g.height,
                    std::vector<std::uint8_t>(static_cast<std::size_t>(g.pixel_count()),
                                              value ? 1 : 0));
}

inline RegionMask region_from_grid(char label, MaskGrid grid, std::string provenance) {
    RegionMask m;
    m.label = label;
    m.per_state = {grid, grid};
    m.provenance = std::move(provenance);
    return m;
}

}  // namespace detail

/// Split masks: region A left of (above) the gap, B right of (below) it, gap
/// pixels in neither. For width w the gap covers indices
/// [center - (w-1)/2, center + w/2] (integer division).
inline std::pair<RegionMask, RegionMask> make_split_masks(const ImageGeometry& geometry,
                                                          SplitOrientation orientation,
                                                          int gap_center, int gap_width) {
    require(gap_width >= 1, ErrorCategory::domain, "make_split_masks: gap width must be >= 1");
    const int extent =
        orientation == SplitOrientation::horizontal ? geometry.width : geometry.height;
    const int gap_begin = gap_center - (gap_width - 1) / 2;
    const int gap_end = gap_begin + gap_width;  // exclusive
    require(gap_begin >= 0 && gap_end <= extent, ErrorCategory::domain,
            "make_split_masks: gap outside the image");
    require(gap_begin > 0 && gap_end < extent, ErrorCategory::domain,
            "make_split_masks: a region would be empty");

    std::vector<std::uint8_t> a(static_cast<std::size_t>(geometry.pixel_count()), 0);
    std::vector<std::uint8_t> b(a.size(), 0);
    for (int row = 0; row < geometry.height; ++row) {
        for (int col = 0; col < geometry.width; ++col) {
            const int along = orientation == SplitOrientation::horizontal ? col : row;
            const std::size_t idx = static_cast<std::size_t>(row) * geometry.width + col;
            if (along < gap_begin)
                a[idx] = 1;
            else if (along >= gap_end)
                b[idx] = 1;
        }
    }
    const std::string tag = std::string("split:") + orientation_name(orientation) +
                            ":center=" + std::to_string(gap_center) +
                            ":width=" + std::to_string(gap_width);
    return {detail::region_from_grid('A', MaskGrid(geometry.width, geometry.height, std::move(a)),
                                     tag),
            detail::region_from_grid('B', MaskGrid(geometry.width, geometry.height, std::move(b)),
                                     tag)};
}

// Built-in pattern descriptors. Free-form pixel lists cover everything the
// library does not.
struct SplitPatternSpec {
    SplitOrientation orientation = SplitOrientation::horizontal;
    int gap_center = 0;  // relative to the geometry center when from_center
    int gap_width = 1;
    bool from_center = true;
};
struct QuadrantPatternSpec {
    int gap = 1;  // width of the separating cross
};
struct ConcentricPatternSpec {
    double core_radius = 8.0;
    int gap = 1;
    double outer_radius = 20.0;
};
struct StripePatternSpec {
    SplitOrientation orientation = SplitOrientation::horizontal;
    int band = 10;
    int gap = 1;
};
struct ExplicitPatternSpec {
    std::vector<std::pair<int, int>> a;  // (col, row)
    std::vector<std::pair<int, int>> b;
};

using PatternSpec = std::variant<SplitPatternSpec, QuadrantPatternSpec, ConcentricPatternSpec,
                                 StripePatternSpec, ExplicitPatternSpec>;

inline std::string pattern_name(const PatternSpec& spec) {
    struct Visitor {
        std::string operator()(const SplitPatternSpec& s) const {
            return std::string("split:") + orientation_name(s.orientation) +
                   ":center=" + std::to_string(s.gap_center) +
                   ":width=" + std::to_string(s.gap_width);
        }
        std::string operator()(const QuadrantPatternSpec& s) const {
            return "quadrant:gap=" + std::to_string(s.gap);
        }
        std::string operator()(const ConcentricPatternSpec& s) const {
            return "concentric:r1=" + std::to_string(s.core_radius) +
                   ":gap=" + std::to_string(s.gap) + ":r2=" + std::to_string(s.outer_radius);
        }
        std::string operator()(const StripePatternSpec& s) const {
            return std::string("stripes:") + orientation_name(s.orientation) +
                   ":band=" + std::to_string(s.band) + ":gap=" + std::to_string(s.gap);
        }
        std::string operator()(const ExplicitPatternSpec&) const { return "pixels"; }
    };
    return std::visit(Visitor{}, spec);
}

/// Masks from a pattern descriptor. Rejects overlapping or empty regions.
inline std::pair<RegionMask, RegionMask> make_pattern_masks(const ImageGeometry& geometry,
                                                            const PatternSpec& spec) {
    const int w = geometry.width;
    const int h = geometry.height;
    std::vector<std::uint8_t> a(static_cast<std::size_t>(geometry.pixel_count()), 0);
    std::vector<std::uint8_t> b(a.size(), 0);

    if (const auto* split = std::get_if<SplitPatternSpec>(&spec)) {
        const int extent = split->orientation == SplitOrientation::horizontal ? w : h;
        const int center = split->from_center ? extent / 2 + split->gap_center : split->gap_center;
        return make_split_masks(geometry, split->orientation, center, split->gap_width);
    }
    if (const auto* quad = std::get_if<QuadrantPatternSpec>(&spec)) {
        // A = top-left + bottom-right, B = top-right + bottom-left, separated
        // by a gap cross through the geometry center.
        const int gx0 = w / 2 - (quad->gap + 1) / 2;
        const int gx1 = gx0 + quad->gap;
        const int gy0 = h / 2 - (quad->gap + 1) / 2;
        const int gy1 = gy0 + quad->gap;
        require(gx0 > 0 && gx1 < w && gy0 > 0 && gy1 < h, ErrorCategory::domain,
                "quadrant pattern: gap exceeds the geometry");
        for (int row = 0; row < h; ++row) {
            if (row >= gy0 && row < gy1) continue;
            const bool top = row < gy0;
            for (int col = 0; col < w; ++col) {
                if (col >= gx0 && col < gx1) continue;
                const bool left = col < gx0;
                const std::size_t idx = static_cast<std::size_t>(row) * w + col;
                if (top == left)
                    a[idx] = 1;
                else
                    b[idx] = 1;
            }
        }
    } else if (const auto* conc = std::get_if<ConcentricPatternSpec>(&spec)) {
        require(conc->core_radius > 0.0 && conc->outer_radius > conc->core_radius + conc->gap,
                ErrorCategory::domain, "concentric pattern: radii out of order");
        const double cx = 0.5 * w;
        const double cy = 0.5 * h;
        for (int row = 0; row < h; ++row) {
            for (int col = 0; col < w; ++col) {
                const double dx = col + 0.5 - cx;
                const double dy = row + 0.5 - cy;
                const double r = std::sqrt(dx * dx + dy * dy);
                const std::size_t idx = static_cast<std::size_t>(row) * w + col;
                if (r < conc->core_radius)
                    a[idx] = 1;
                else if (r >= conc->core_radius + conc->gap && r < conc->outer_radius)
                    b[idx] = 1;
            }
        }
    } else if (const auto* stripes = std::get_if<StripePatternSpec>(&spec)) {
        require(stripes->band >= 1 && stripes->gap >= 0, ErrorCategory::domain,
                "stripe pattern: band must be >= 1");
        const int period = 2 * (stripes->band + stripes->gap);
        const int extent = stripes->orientation == SplitOrientation::horizontal ? w : h;
        // Center the stripe pattern on the geometry midline.
        const int offset = extent / 2 - (stripes->band + stripes->gap);
        for (int row = 0; row < h; ++row) {
            for (int col = 0; col < w; ++col) {
                const int along = stripes->orientation == SplitOrientation::horizontal ? col : row;
                int phase = (along - offset) % period;
                if (phase < 0) phase += period;
                const std::size_t idx = static_cast<std::size_t>(row) * w + col;
                if (phase < stripes->band)
                    a[idx] = 1;
                else if (phase >= stripes->band + stripes->gap &&
                         phase < 2 * stripes->band + stripes->gap)
                    b[idx] = 1;
            }
        }
    } else if (const auto* px = std::get_if<ExplicitPatternSpec>(&spec)) {
        for (const auto& [col, row] : px->a) {
            require(col >= 0 && col < w && row >= 0 && row < h, ErrorCategory::domain,
                    "explicit pattern: pixel outside the geometry");
            a[static_cast<std::size_t>(row) * w + col] = 1;
        }
        for (const auto& [col, row] : px->b) {
            require(col >= 0 && col < w && row >= 0 && row < h, ErrorCategory::domain,
                    "explicit pattern: pixel outside the geometry");
            b[static_cast<std::size_t>(row) * w + col] = 1;
        }
    }

    MaskGrid ga(w, h, std::move(a));
    MaskGrid gb(w, h, std::move(b));
    require(!ga.overlaps(gb), ErrorCategory::domain, "pattern regions overlap");
    require(!ga.empty() && !gb.empty(), ErrorCategory::domain, "pattern region is empty");
    const std::string tag = pattern_name(spec);
    return {detail::region_from_grid('A', std::move(ga), tag),
            detail::region_from_grid('B', std::move(gb), tag)};
}

/// Mode overlap f(x) = mass of the Gaussian kernel centered at x that falls
/// inside the mask; separability reduces each run of mask pixels to two
/// error-function differences.
inline double mode_overlap(const Vec2& psf_sigma, const MaskGrid& mask, const Vec2& pos) {
    const double inv_x = detail::kInvSqrt2 / psf_sigma.x;
    const double inv_y = detail::kInvSqrt2 / psf_sigma.y;
    constexpr double kTailSigmas = 9.0;
    double f = 0.0;
    int cached_row = -1;
    double fy = 0.0;
    for (const MaskGrid::Run& run : mask.runs()) {
        if (std::abs(run.row + 0.5 - pos.y) > kTailSigmas * psf_sigma.y + 1.0) continue;
        if (run.row != cached_row) {
            fy = 0.5 * (std::erf((run.row + 1 - pos.y) * inv_y) - std::erf((run.row - pos.y) * inv_y));
            cached_row = run.row;
        }
        const double fx =
            0.5 * (std::erf((run.col_end - pos.x) * inv_x) - std::erf((run.col_begin - pos.x) * inv_x));
        f += fy * fx;
    }
    return f;
}

inline double mode_overlap(const PsfModel& psf, const RegionMask& mask, int state,
                           const Vec2& pos) {
    return mode_overlap(psf.sigma[static_cast<std::size_t>(state)], mask.grid(state), pos);
}

struct QuadratureOptions {
    int supersample = 4;       // sample points per pixel edge
    double support_sigmas = 8.0;  // half-extent of the density window
};

// Density-weighted region integrals for one internal state:
//   mean_f = <rho f>, mean_f2 = <rho f^2>, and optionally <rho f_A f_B>.
struct RegionIntegrals {
    double mean_f_a = 0.0;
    double mean_f2_a = 0.0;
    double mean_f_b = 0.0;
    double mean_f2_b = 0.0;
    double mean_fafb = 0.0;
};

namespace detail {

template <typename F>
void quadrature_sweep(const CloudDensity& density, int state, const QuadratureOptions& opt,
                      F&& accumulate) {
    const Vec2& c = density.center(state);
    const Vec2& s = density.sigma(state);
    const double x0 = c.x - opt.support_sigmas * s.x;
    const double x1 = c.x + opt.support_sigmas * s.x;
    const double y0 = c.y - opt.support_sigmas * s.y;
    const double y1 = c.y + opt.support_sigmas * s.y;
    const int nx = std::max(1, static_cast<int>(std::ceil((x1 - x0) * opt.supersample)));
    const int ny = std::max(1, static_cast<int>(std::ceil((y1 - y0) * opt.supersample)));
    const double dx = (x1 - x0) / nx;
    const double dy = (y1 - y0) / ny;
    for (int iy = 0; iy < ny; ++iy) {
        const double y = y0 + (iy + 0.5) * dy;
        for (int ix = 0; ix < nx; ++ix) {
            const double x = x0 + (ix + 0.5) * dx;
            const double rho = density.pdf(state, x, y);
            if (rho <= 0.0) continue;
            accumulate(x, y, rho * dx * dy);
        }
    }
}

}  // namespace detail

inline RegionIntegrals region_integrals(const CloudDensity& density, const PsfModel& psf,
                                        int state, const MaskGrid& mask_a,
                                        const MaskGrid* mask_b = nullptr,
                                        const QuadratureOptions& opt = {}) {
    RegionIntegrals out;
    const Vec2 sigma = psf.sigma[static_cast<std::size_t>(state)];
    detail::quadrature_sweep(density, state, opt, [&](double x, double y, double weight) {
        const double fa = mode_overlap(sigma, mask_a, {x, y});
        out.mean_f_a += weight * fa;
        out.mean_f2_a += weight * fa * fa;
        if (mask_b) {
            const double fb = mode_overlap(sigma, *mask_b, {x, y});
            out.mean_f_b += weight * fb;
            out.mean_f2_b += weight * fb * fb;
            out.mean_fafb += weight * fa * fb;
        }
    });
    return out;
}

/// Mode-overlap profile of one region: per-state <rho f>, <rho f^2> and the
/// effective coupling eta = <rho f^2>/<rho f>. The conservative (smaller)
/// per-state eta is the one used to normalize local spins.
class OverlapProfile {
public:
    OverlapProfile(const CloudDensity& density, const PsfModel& psf, const RegionMask& mask,
                   const QuadratureOptions& opt = {})
        : psf_(psf), mask_(mask) {
        for (int state = 0; state < 2; ++state) {
            const RegionIntegrals m =
                region_integrals(density, psf, state, mask.grid(state), nullptr, opt);
            require(m.mean_f_a > 1e-12, ErrorCategory::domain,
                    "eta_eff: region carries no density (undefined region)");
            mean_f_[static_cast<std::size_t>(state)] = m.mean_f_a;
            mean_f2_[static_cast<std::size_t>(state)] = m.mean_f2_a;
            eta_state_[static_cast<std::size_t>(state)] = m.mean_f2_a / m.mean_f_a;
        }
        eta_ = std::min(eta_state_[0], eta_state_[1]);
    }

    double eta() const { return eta_; }
    double eta(int state) const { return eta_state_[static_cast<std::size_t>(state)]; }
    double mean_f(int state) const { return mean_f_[static_cast<std::size_t>(state)]; }
    double mean_f2(int state) const { return mean_f2_[static_cast<std::size_t>(state)]; }
    const RegionMask& mask() const { return mask_; }

    double f(int state, const Vec2& pos) const {
        return mode_overlap(psf_.sigma[static_cast<std::size_t>(state)], mask_.grid(state), pos);
    }

private:
    PsfModel psf_;
    RegionMask mask_;
    std::array<double, 2> eta_state_{};
    std::array<double, 2> mean_f_{};
    std::array<double, 2> mean_f2_{};
    double eta_ = 1.0;
};

/// Effective coupling eta = <rho f^2>/<rho f> by supersampled quadrature;
/// per-state values are computed and the smaller returned.
inline double eta_eff(const CloudDensity& density, const PsfModel& psf, const RegionMask& mask,
                      const QuadratureOptions& opt = {}) {
    return OverlapProfile(density, psf, mask, opt).eta();
}

/// Detected atom numbers (N1, N2) inside the region; fractional values are
/// kept as-is.
inline std::pair<double, double> count_atoms(const ImagePair& images, const RegionMask& mask) {
    require(mask.grid(0).width() == images.width && mask.grid(0).height() == images.height,
            ErrorCategory::domain, "count_atoms: mask does not fit the image geometry");
    const double n1 = mask.grid(0).sum_frame(images.frame1);
    const double n2 = mask.grid(1).sum_frame(images.frame2);
    return {n1, n2};
}

/// A local spin value extracted from one shot and one region.
struct SpinSample {
    double value = 0.0;  // (N1 - N2) / (2 eta)
    Axis axis = Axis::z;
    char region = 'A';
    double n1 = 0.0;
    double n2 = 0.0;
    double noise_variance = 0.0;  // Var(Delta) for this region
};

// Detection-noise variance of the extracted spin value: the per-pixel noise
// integrated over each state's mask, propagated through (N1 - N2)/(2 eta).
inline double region_noise_variance(const DetectionNoiseModel& noise, const RegionMask& mask,
                                    const ImageGeometry& geometry, double eta) {
    const double v1 = noise.pixel_variance(0, geometry.pixel_count()) * mask.grid(0).pixel_count();
    const double v2 = noise.pixel_variance(1, geometry.pixel_count()) * mask.grid(1).pixel_count();
    return (v1 + v2) / (4.0 * eta * eta);
}

inline SpinSample extract_spin_sample(const ImagePair& images, const RegionMask& mask,
                                      const OverlapProfile& profile, Axis axis,
                                      const DetectionNoiseModel& noise) {
    const double eta = profile.eta();
    require(eta > 0.0, ErrorCategory::domain, "extract_spin_sample: eta must be positive");
    const auto [n1, n2] = count_atoms(images, mask);
    SpinSample s;
    s.value = (n1 - n2) / (2.0 * eta);
    s.axis = axis;
    s.region = mask.label;
    s.n1 = n1;
    s.n2 = n2;
    s.noise_variance = region_noise_variance(
        noise, mask, ImageGeometry{images.width, images.height}, eta);
    return s;
}

}  // namespace spinsplit
