#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinsplit/errors.hpp"
#include "spinsplit/imaging.hpp"
#include "spinsplit/regions.hpp"
#include "spinsplit/rotation.hpp"
#include "spinsplit/state_prep.hpp"

namespace spinsplit {

using nlohmann::json;

enum class StateKind { coherent, squeezed };

// Prepared-state specification. For squeezed states the twisting strength and
// tilt may be given explicitly or tuned automatically to the target Wineland
// squeezing.
struct StateConfig {
    StateKind kind = StateKind::squeezed;
    int n_atoms = 590;
    double n_sigma = 30.0;           // shot-to-shot atom-number spread (Gaussian, truncated > 0)
    std::optional<double> mu;        // twisting strength; unset -> tuned
    std::optional<double> tilt_rad;  // alignment tilt about the mean spin; unset -> tuned
    double target_db = -3.8;         // tuning target when mu is unset
    double phase_noise_rad = 0.0;    // shot-to-shot rms rotation about z
    double polar = 0.5 * kPi;        // coherent-state direction
    double azimuth = 0.0;
};

struct CloudConfig {
    // Index 0 -> state |1| (second frame, longer expansion), 1 -> state |2>.
    std::array<Vec2, 2> sigma{Vec2{3.06, 4.0}, Vec2{3.0, 3.2}};
};

struct AcquisitionConfig {
    int shots_plus_x = 4;
    int shots_minus_x = 4;
    int shots_y = 70;
    int shots_z = 60;
    int subsets = 40;

    int shots_per_subset() const { return shots_plus_x + shots_minus_x + shots_y + shots_z; }
};

struct MaskSweepConfig {
    SplitOrientation orientation = SplitOrientation::horizontal;
    int gap_width = 1;
    std::vector<int> gap_offsets = {-5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5};  // relative to centroid
    std::vector<int> gap_widths = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    double width_sweep_ratio = 0.40;  // splitting ratio at which the width sweep is centered
    // Sized for the default cloud (rms ~3 px): every region carries a
    // substantial share of the density.
    std::vector<PatternSpec> patterns = {
        PatternSpec{SplitPatternSpec{SplitOrientation::horizontal, 0, 1, true}},
        PatternSpec{SplitPatternSpec{SplitOrientation::vertical, 0, 1, true}},
        PatternSpec{QuadrantPatternSpec{1}},
        PatternSpec{ConcentricPatternSpec{4.0, 1, 14.0}},
        PatternSpec{StripePatternSpec{SplitOrientation::horizontal, 8, 1}},
    };
};

struct RunConfig {
    StateConfig state;
    CloudConfig cloud;
    PsfModel psf;
    DetectionNoiseModel noise;
    ImageGeometry geometry{64, 80};
    AcquisitionConfig acquisition;
    MaskSweepConfig masks;
    std::uint64_t seed = 1;
    bool store_truth = true;

    void validate() const {
        require(state.n_atoms >= 1, ErrorCategory::config, "config: n_atoms must be >= 1");
        require(state.n_sigma >= 0.0, ErrorCategory::config, "config: n_sigma must be >= 0");
        require(state.phase_noise_rad >= 0.0, ErrorCategory::config,
                "config: phase noise must be >= 0");
        for (const Vec2& s : cloud.sigma)
            require(s.x > 0.0 && s.y > 0.0, ErrorCategory::config,
                    "config: cloud sizes must be positive");
        psf.validate();
        require(noise.frame_rms[0] >= 0.0 && noise.frame_rms[1] >= 0.0, ErrorCategory::config,
                "config: noise rms must be >= 0");
        require(geometry.width > 0 && geometry.height > 0, ErrorCategory::config,
                "config: geometry must be positive");
        require(acquisition.shots_plus_x >= 1 && acquisition.shots_minus_x >= 1,
                ErrorCategory::config, "config: need at least one +x and one -x shot per subset");
        require(acquisition.shots_y >= 3 && acquisition.shots_z >= 3, ErrorCategory::config,
                "config: need at least 3 y and 3 z shots per subset");
        require(acquisition.subsets >= 2, ErrorCategory::config,
                "config: need at least 2 subsets");
        require(acquisition.shots_per_subset() > 0, ErrorCategory::config,
                "config: empty acquisition");
        require(masks.gap_width >= 1, ErrorCategory::config, "config: gap width must be >= 1");
    }

    // The cloud rendered by this configuration, centered in the geometry.
    CloudDensity cloud_density() const {
        const Vec2 c = geometry.center();
        return CloudDensity({c, c}, cloud.sigma);
    }

    // Resolves auto-tuned squeezing parameters; records the solved values so
    // the resolved config written next to outputs is self-contained.
    void resolve_state() {
        if (state.kind == StateKind::squeezed && (!state.mu || !state.tilt_rad)) {
            const SqueezingSolution sol = tune_squeezing(state.n_atoms, state.target_db);
            if (!state.mu) state.mu = sol.mu;
            if (!state.tilt_rad) state.tilt_rad = sol.tilt;
        }
    }
};

// --- JSON (de)serialization -------------------------------------------------

inline json to_json(const PatternSpec& spec) {
    json j;
    if (const auto* s = std::get_if<SplitPatternSpec>(&spec)) {
        j["type"] = "split";
        j["orientation"] = orientation_name(s->orientation);
        j["gap_center"] = s->gap_center;
        j["gap_width"] = s->gap_width;
        j["from_center"] = s->from_center;
    } else if (const auto* q = std::get_if<QuadrantPatternSpec>(&spec)) {
        j["type"] = "quadrant";
        j["gap"] = q->gap;
    } else if (const auto* c = std::get_if<ConcentricPatternSpec>(&spec)) {
        j["type"] = "concentric";
        j["core_radius"] = c->core_radius;
        j["gap"] = c->gap;
        j["outer_radius"] = c->outer_radius;
    } else if (const auto* st = std::get_if<StripePatternSpec>(&spec)) {
        j["type"] = "stripes";
        j["orientation"] = orientation_name(st->orientation);
        j["band"] = st->band;
        j["gap"] = st->gap;
    } else if (const auto* px = std::get_if<ExplicitPatternSpec>(&spec)) {
        j["type"] = "pixels";
        j["a"] = px->a;
        j["b"] = px->b;
    }
    return j;
}

inline SplitOrientation orientation_from_name(const std::string& name) {
    if (name == "horizontal") return SplitOrientation::horizontal;
    if (name == "vertical") return SplitOrientation::vertical;
    fail(ErrorCategory::config, "unknown orientation: " + name);
}

inline PatternSpec pattern_from_json(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "split") {
        SplitPatternSpec s;
        s.orientation = orientation_from_name(j.at("orientation").get<std::string>());
        s.gap_center = j.value("gap_center", 0);
        s.gap_width = j.value("gap_width", 1);
        s.from_center = j.value("from_center", true);
        return s;
    }
    if (type == "quadrant") return QuadrantPatternSpec{j.value("gap", 1)};
    if (type == "concentric")
        return ConcentricPatternSpec{j.value("core_radius", 8.0), j.value("gap", 1),
                                     j.value("outer_radius", 20.0)};
    if (type == "stripes") {
        StripePatternSpec s;
        s.orientation = orientation_from_name(j.at("orientation").get<std::string>());
        s.band = j.value("band", 10);
        s.gap = j.value("gap", 1);
        return s;
    }
    if (type == "pixels") {
        ExplicitPatternSpec s;
        s.a = j.at("a").get<std::vector<std::pair<int, int>>>();
        s.b = j.at("b").get<std::vector<std::pair<int, int>>>();
        return s;
    }
    fail(ErrorCategory::config, "unknown pattern type: " + type);
}

inline json to_json(const RunConfig& cfg) {
    json j;
    j["state"] = {
        {"kind", cfg.state.kind == StateKind::coherent ? "coherent" : "squeezed"},
        {"n_atoms", cfg.state.n_atoms},
        {"n_sigma", cfg.state.n_sigma},
        {"target_db", cfg.state.target_db},
        {"phase_noise_rad", cfg.state.phase_noise_rad},
        {"polar", cfg.state.polar},
        {"azimuth", cfg.state.azimuth},
    };
    if (cfg.state.mu) j["state"]["mu"] = *cfg.state.mu;
    if (cfg.state.tilt_rad) j["state"]["tilt_rad"] = *cfg.state.tilt_rad;
    j["cloud"] = {{"sigma_state1", {cfg.cloud.sigma[0].x, cfg.cloud.sigma[0].y}},
                  {"sigma_state2", {cfg.cloud.sigma[1].x, cfg.cloud.sigma[1].y}}};
    j["psf"] = {{"sigma_state1", {cfg.psf.sigma[0].x, cfg.psf.sigma[0].y}},
                {"sigma_state2", {cfg.psf.sigma[1].x, cfg.psf.sigma[1].y}}};
    j["noise"] = {{"frame_rms_state1", cfg.noise.frame_rms[0]},
                  {"frame_rms_state2", cfg.noise.frame_rms[1]},
                  {"enabled", cfg.noise.enabled}};
    j["geometry"] = {{"width", cfg.geometry.width}, {"height", cfg.geometry.height}};
    j["acquisition"] = {{"plus_x", cfg.acquisition.shots_plus_x},
                        {"minus_x", cfg.acquisition.shots_minus_x},
                        {"y", cfg.acquisition.shots_y},
                        {"z", cfg.acquisition.shots_z},
                        {"subsets", cfg.acquisition.subsets}};
    json patterns = json::array();
    for (const PatternSpec& p : cfg.masks.patterns) patterns.push_back(to_json(p));
    j["masks"] = {{"orientation", orientation_name(cfg.masks.orientation)},
                  {"gap_width", cfg.masks.gap_width},
                  {"gap_offsets", cfg.masks.gap_offsets},
                  {"gap_widths", cfg.masks.gap_widths},
                  {"width_sweep_ratio", cfg.masks.width_sweep_ratio},
                  {"patterns", patterns}};
    j["seed"] = cfg.seed;
    j["store_truth"] = cfg.store_truth;
    return j;
}

inline RunConfig config_from_json(const json& j) {
    RunConfig cfg;
    try {
        if (j.contains("state")) {
            const json& s = j["state"];
            const std::string kind = s.value("kind", "squeezed");
            require(kind == "coherent" || kind == "squeezed", ErrorCategory::config,
                    "config: state kind must be 'coherent' or 'squeezed'");
            cfg.state.kind = kind == "coherent" ? StateKind::coherent : StateKind::squeezed;
            cfg.state.n_atoms = s.value("n_atoms", cfg.state.n_atoms);
            cfg.state.n_sigma = s.value("n_sigma", cfg.state.n_sigma);
            cfg.state.target_db = s.value("target_db", cfg.state.target_db);
            cfg.state.phase_noise_rad = s.value("phase_noise_rad", cfg.state.phase_noise_rad);
            cfg.state.polar = s.value("polar", cfg.state.polar);
            cfg.state.azimuth = s.value("azimuth", cfg.state.azimuth);
            if (s.contains("mu")) cfg.state.mu = s["mu"].get<double>();
            if (s.contains("tilt_rad")) cfg.state.tilt_rad = s["tilt_rad"].get<double>();
        }
        if (j.contains("cloud")) {
            const json& c = j["cloud"];
            if (c.contains("sigma_state1"))
                cfg.cloud.sigma[0] = {c["sigma_state1"][0].get<double>(),
                                      c["sigma_state1"][1].get<double>()};
            if (c.contains("sigma_state2"))
                cfg.cloud.sigma[1] = {c["sigma_state2"][0].get<double>(),
                                      c["sigma_state2"][1].get<double>()};
        }
        if (j.contains("psf")) {
            const json& p = j["psf"];
            if (p.contains("sigma_state1"))
                cfg.psf.sigma[0] = {p["sigma_state1"][0].get<double>(),
                                    p["sigma_state1"][1].get<double>()};
            if (p.contains("sigma_state2"))
                cfg.psf.sigma[1] = {p["sigma_state2"][0].get<double>(),
                                    p["sigma_state2"][1].get<double>()};
        }
        if (j.contains("noise")) {
            const json& n = j["noise"];
            cfg.noise.frame_rms[0] = n.value("frame_rms_state1", cfg.noise.frame_rms[0]);
            cfg.noise.frame_rms[1] = n.value("frame_rms_state2", cfg.noise.frame_rms[1]);
            cfg.noise.enabled = n.value("enabled", cfg.noise.enabled);
        }
        if (j.contains("geometry")) {
            cfg.geometry.width = j["geometry"].value("width", cfg.geometry.width);
            cfg.geometry.height = j["geometry"].value("height", cfg.geometry.height);
        }
        if (j.contains("acquisition")) {
            const json& a = j["acquisition"];
            cfg.acquisition.shots_plus_x = a.value("plus_x", cfg.acquisition.shots_plus_x);
            cfg.acquisition.shots_minus_x = a.value("minus_x", cfg.acquisition.shots_minus_x);
            cfg.acquisition.shots_y = a.value("y", cfg.acquisition.shots_y);
            cfg.acquisition.shots_z = a.value("z", cfg.acquisition.shots_z);
            cfg.acquisition.subsets = a.value("subsets", cfg.acquisition.subsets);
        }
        if (j.contains("masks")) {
            const json& m = j["masks"];
            if (m.contains("orientation"))
                cfg.masks.orientation = orientation_from_name(m["orientation"].get<std::string>());
            cfg.masks.gap_width = m.value("gap_width", cfg.masks.gap_width);
            if (m.contains("gap_offsets"))
                cfg.masks.gap_offsets = m["gap_offsets"].get<std::vector<int>>();
            if (m.contains("gap_widths"))
                cfg.masks.gap_widths = m["gap_widths"].get<std::vector<int>>();
            cfg.masks.width_sweep_ratio = m.value("width_sweep_ratio", cfg.masks.width_sweep_ratio);
            if (m.contains("patterns")) {
                cfg.masks.patterns.clear();
                for (const json& p : m["patterns"]) cfg.masks.patterns.push_back(pattern_from_json(p));
            }
        }
        cfg.seed = j.value("seed", cfg.seed);
        cfg.store_truth = j.value("store_truth", cfg.store_truth);
    } catch (const json::exception& e) {
        fail(ErrorCategory::config, std::string("config: malformed JSON structure: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCategory::io, "cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail(ErrorCategory::config, "config: invalid JSON in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

inline void save_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    require(out.good(), ErrorCategory::io, "cannot write file: " + path);
    out << j.dump(2) << '\n';
    require(out.good(), ErrorCategory::io, "write failed: " + path);
}

}  // namespace spinsplit
