#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spinsplit/errors.hpp"
#include "spinsplit/rng.hpp"

namespace spinsplit {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

// Internal-state index used throughout the imaging stack: 0 -> |1>, 1 -> |2>.
inline int state_index_from_outcome(double outcome) { return outcome > 0.0 ? 1 : 0; }

struct ImageGeometry {
    int width = 64;
    int height = 80;
    int pixel_count() const { return width * height; }
    Vec2 center() const { return {0.5 * width, 0.5 * height}; }
};

// Calibration constants of the imaging model. Pixel pitch ties the blur
// formula (in meters) to the pixel-unit PSF widths.
inline constexpr double kPixelSizeM = 1.3e-6;
inline constexpr double kImagingPulseS = 50e-6;
inline constexpr double kOpticalPsfHorPx = 1.1;
inline constexpr double kTotalPsfHorPx = 1.4;

namespace rb87 {
// D2-line natural linewidth (rad/s) and photon recoil velocity (m/s).
inline constexpr double kLinewidth = 2.0 * 3.14159265358979323846 * 6.0666e6;
inline constexpr double kRecoilVelocity = 5.8845e-3;
}  // namespace rb87

/// rms transverse blur (meters) accumulated by random photon scattering over a
/// square imaging pulse: sqrt((Gamma/72) * s/(1+s) * v_rec^2 * dt^3).
inline double blur_rms(double gamma, double saturation, double v_rec, double dt_pulse) {
    require(gamma >= 0.0 && saturation >= 0.0 && v_rec >= 0.0 && dt_pulse >= 0.0,
            ErrorCategory::domain, "blur_rms: parameters must be non-negative");
    const double sat_factor = std::isinf(saturation) ? 1.0 : saturation / (1.0 + saturation);
    return std::sqrt(gamma / 72.0 * sat_factor * v_rec * v_rec * dt_pulse * dt_pulse * dt_pulse);
}

/// Saturation parameter that reproduces a given blur rms (inverts blur_rms).
inline double saturation_for_blur(double target_blur_m, double gamma, double v_rec,
                                  double dt_pulse) {
    const double max_blur2 = gamma / 72.0 * v_rec * v_rec * dt_pulse * dt_pulse * dt_pulse;
    require(max_blur2 > 0.0, ErrorCategory::domain, "saturation_for_blur: zero pulse");
    const double r = target_blur_m * target_blur_m / max_blur2;
    require(r < 1.0, ErrorCategory::domain,
            "saturation_for_blur: target exceeds the saturated-limit blur");
    return r / (1.0 - r);
}

/// Expanded-cloud density of atom positions, per internal state. Gaussian by
/// default; optionally a user-supplied sampled grid (probability per pixel).
class CloudDensity {
public:
    CloudDensity(std::array<Vec2, 2> center, std::array<Vec2, 2> sigma)
        : center_(center), sigma_(sigma) {
        for (int s = 0; s < 2; ++s)
            require(sigma_[s].x > 0.0 && sigma_[s].y > 0.0, ErrorCategory::config,
                    "CloudDensity: rms sizes must be positive");
    }

    // Sampled-grid density: weights[row * width + col] >= 0, normalized here.
    // The grid is used for both states; center/sigma keep nominal values for
    // quadrature-window sizing.
    CloudDensity(std::array<Vec2, 2> center, std::array<Vec2, 2> sigma, int grid_width,
                 int grid_height, std::vector<double> weights)
        : CloudDensity(center, sigma) {
        require(grid_width > 0 && grid_height > 0 &&
                    weights.size() == static_cast<std::size_t>(grid_width) * grid_height,
                ErrorCategory::config, "CloudDensity: bad grid dimensions");
        double total = 0.0;
        for (double w : weights) {
            require(w >= 0.0, ErrorCategory::config, "CloudDensity: negative grid weight");
            total += w;
        }
        require(total > 0.0, ErrorCategory::config, "CloudDensity: empty grid density");
        grid_width_ = grid_width;
        grid_height_ = grid_height;
        grid_cdf_ = std::move(weights);
        double acc = 0.0;
        for (double& w : grid_cdf_) {
            acc += w / total;
            w = acc;
        }
        grid_cdf_.back() = 1.0;
        grid_total_ = total;
        has_grid_ = true;
    }

    bool has_grid() const { return has_grid_; }
    const Vec2& center(int state) const { return center_[static_cast<std::size_t>(state)]; }
    const Vec2& sigma(int state) const { return sigma_[static_cast<std::size_t>(state)]; }

    Vec2 sample(int state, Rng& rng) const {
        if (!has_grid_) {
            const Vec2& c = center_[static_cast<std::size_t>(state)];
            const Vec2& s = sigma_[static_cast<std::size_t>(state)];
            return {c.x + s.x * rng.normal(), c.y + s.y * rng.normal()};
        }
        const double u = rng.uniform();
        const auto it = std::lower_bound(grid_cdf_.begin(), grid_cdf_.end(), u);
        const auto cell = static_cast<int>(std::distance(grid_cdf_.begin(), it));
        const int row = cell / grid_width_;
        const int col = cell % grid_width_;
        return {col + rng.uniform(), row + rng.uniform()};
    }

    // Probability density at a point (per pixel^2).
    double pdf(int state, double x, double y) const {
        if (!has_grid_) {
            const Vec2& c = center_[static_cast<std::size_t>(state)];
            const Vec2& s = sigma_[static_cast<std::size_t>(state)];
            const double dx = (x - c.x) / s.x;
            const double dy = (y - c.y) / s.y;
            return std::exp(-0.5 * (dx * dx + dy * dy)) / (2.0 * 3.14159265358979323846 * s.x * s.y);
        }
        const int col = static_cast<int>(std::floor(x));
        const int row = static_cast<int>(std::floor(y));
        if (col < 0 || col >= grid_width_ || row < 0 || row >= grid_height_) return 0.0;
        const std::size_t cell = static_cast<std::size_t>(row) * grid_width_ + col;
        const double prev = (cell == 0) ? 0.0 : grid_cdf_[cell - 1];
        return grid_cdf_[cell] - prev;
    }

private:
    std::array<Vec2, 2> center_;
    std::array<Vec2, 2> sigma_;
    bool has_grid_ = false;
    int grid_width_ = 0;
    int grid_height_ = 0;
    double grid_total_ = 0.0;
    std::vector<double> grid_cdf_;
};

/// Gaussian imaging kernel widths (pixels), per internal state. The vertical
/// width differs between the states because the later frame integrates over a
/// longer fall.
struct PsfModel {
    std::array<Vec2, 2> sigma{Vec2{1.4, 2.1}, Vec2{1.4, 2.0}};  // index 0 -> |1>, 1 -> |2>

    void validate() const {
        for (const Vec2& s : sigma)
            require(s.x > 0.0 && s.y > 0.0, ErrorCategory::config,
                    "PsfModel: widths must be positive");
    }
};

/// Per-pixel i.i.d. Gaussian detection noise, calibrated so the whole-frame
/// sum reproduces the configured rms atom-number noise.
struct DetectionNoiseModel {
    std::array<double, 2> frame_rms{3.5, 3.3};  // atoms per whole picture; index 0 -> |1>
    bool enabled = true;

    double pixel_sigma(int state, int pixel_count) const {
        if (!enabled) return 0.0;
        return frame_rms[static_cast<std::size_t>(state)] /
               std::sqrt(static_cast<double>(pixel_count));
    }

    double pixel_variance(int state, int pixel_count) const {
        const double s = pixel_sigma(state, pixel_count);
        return s * s;
    }
};

/// One rendered shot: detected atom-number density per pixel for each state.
struct ImagePair {
    int width = 0;
    int height = 0;
    std::vector<float> frame2;  // state |2>
    std::vector<float> frame1;  // state |1>
    bool truncation_warning = false;

    const std::vector<float>& frame(int state) const { return state == 0 ? frame1 : frame2; }
    std::vector<float>& frame(int state) { return state == 0 ? frame1 : frame2; }

    double frame_sum(int state) const {
        double s = 0.0;
        for (float v : frame(state)) s += v;
        return s;
    }
};

/// I.i.d. positions from the per-state expanded-cloud density.
inline std::vector<Vec2> sample_positions(const CloudDensity& density, int n_atoms,
                                          int state_label, Rng& rng) {
    require(n_atoms >= 0, ErrorCategory::domain, "sample_positions: negative atom count");
    require(state_label == 1 || state_label == 2, ErrorCategory::domain,
            "sample_positions: state label must be 1 or 2");
    std::vector<Vec2> out;
    out.reserve(static_cast<std::size_t>(n_atoms));
    for (int i = 0; i < n_atoms; ++i) out.push_back(density.sample(state_label - 1, rng));
    return out;
}

namespace detail {

inline constexpr double kInvSqrt2 = 0.70710678118654752440084436210485;
inline constexpr double kKernelWindowSigmas = 6.0;

// Per-pixel masses of a 1-D unit Gaussian centered at c over pixels
// [i, i+1), i in [i0, i1); written into w. Returns the total deposited mass.
inline double pixel_masses_1d(double c, double sigma, int i0, int i1, std::vector<double>& w) {
    w.resize(static_cast<std::size_t>(i1 - i0));
    const double inv = kInvSqrt2 / sigma;
    double prev = std::erf((i0 - c) * inv);
    double total = 0.0;
    for (int i = i0; i < i1; ++i) {
        const double next = std::erf((i + 1 - c) * inv);
        const double m = 0.5 * (next - prev);
        w[static_cast<std::size_t>(i - i0)] = m;
        total += m;
        prev = next;
    }
    return total;
}

}  // namespace detail

/// Renders one shot: every atom deposits its pixel-integrated Gaussian kernel
/// (products of error-function differences) into the frame of its internal
/// state, then additive detection noise is applied per pixel. Kernels are
/// evaluated on a +-6 sigma window; the warning flag is raised when deposits
/// clip the field of view by more than 1e-6 of an atom.
inline ImagePair render_shot(std::span<const Vec2> positions, std::span<const double> outcomes,
                             const PsfModel& psf, const DetectionNoiseModel& noise,
                             const ImageGeometry& geometry, Rng& rng) {
    require(positions.size() == outcomes.size(), ErrorCategory::domain,
            "render_shot: positions and outcomes must have equal length");
    psf.validate();
    const int w = geometry.width;
    const int h = geometry.height;
    require(w > 0 && h > 0, ErrorCategory::config, "render_shot: empty geometry");

    std::array<std::vector<double>, 2> buffers;
    buffers[0].assign(static_cast<std::size_t>(w) * h, 0.0);
    buffers[1].assign(static_cast<std::size_t>(w) * h, 0.0);

    std::vector<double> wx, wy;
    double max_loss = 0.0;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const int state = state_index_from_outcome(outcomes[i]);
        const Vec2 s = psf.sigma[static_cast<std::size_t>(state)];
        const Vec2 p = positions[i];
        const int x0 = std::max(0, static_cast<int>(std::floor(p.x - detail::kKernelWindowSigmas * s.x)));
        const int x1 = std::min(w, static_cast<int>(std::ceil(p.x + detail::kKernelWindowSigmas * s.x)));
        const int y0 = std::max(0, static_cast<int>(std::floor(p.y - detail::kKernelWindowSigmas * s.y)));
        const int y1 = std::min(h, static_cast<int>(std::ceil(p.y + detail::kKernelWindowSigmas * s.y)));
        if (x0 >= x1 || y0 >= y1) {
            max_loss = 1.0;  // atom entirely outside the field of view
            continue;
        }
        const double mx = detail::pixel_masses_1d(p.x, s.x, x0, x1, wx);
        const double my = detail::pixel_masses_1d(p.y, s.y, y0, y1, wy);
        max_loss = std::max(max_loss, 1.0 - mx * my);
        std::vector<double>& buf = buffers[static_cast<std::size_t>(state)];
        for (int row = y0; row < y1; ++row) {
            const double fy = wy[static_cast<std::size_t>(row - y0)];
            double* dst = buf.data() + static_cast<std::size_t>(row) * w;
            for (int col = x0; col < x1; ++col)
                dst[col] += fy * wx[static_cast<std::size_t>(col - x0)];
        }
    }

    ImagePair out;
    out.width = w;
    out.height = h;
    out.truncation_warning = max_loss > 1e-6;
    out.frame1.resize(buffers[0].size());
    out.frame2.resize(buffers[1].size());
    for (int state = 0; state < 2; ++state) {
        const double sigma_px = noise.pixel_sigma(state, geometry.pixel_count());
        std::vector<float>& dst = out.frame(state);
        const std::vector<double>& src = buffers[static_cast<std::size_t>(state)];
        if (sigma_px > 0.0) {
            for (std::size_t p = 0; p < src.size(); ++p)
                dst[p] = static_cast<float>(src[p] + sigma_px * rng.normal());
        } else {
            for (std::size_t p = 0; p < src.size(); ++p) dst[p] = static_cast<float>(src[p]);
        }
    }
    return out;
}

// True when the per-state cloud fits in the geometry with `sigmas` rms margin.
inline bool geometry_holds_cloud(const CloudDensity& density, const ImageGeometry& geometry,
                                 double sigmas = 5.0) {
    for (int s = 0; s < 2; ++s) {
        const Vec2& c = density.center(s);
        const Vec2& sig = density.sigma(s);
        if (c.x - sigmas * sig.x < 0.0 || c.x + sigmas * sig.x > geometry.width ||
            c.y - sigmas * sig.y < 0.0 || c.y + sigmas * sig.y > geometry.height)
            return false;
    }
    return true;
}

}  // namespace spinsplit
