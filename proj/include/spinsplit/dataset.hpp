#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinsplit/config.hpp"
#include "spinsplit/errors.hpp"
#include "spinsplit/imaging.hpp"
#include "spinsplit/rotation.hpp"

namespace spinsplit {

static_assert(std::endian::native == std::endian::little,
              "dataset format is little-endian; byte swapping is not implemented");

struct ShotMeta {
    std::int64_t id = 0;
    int subset = 0;
    Axis axis = Axis::z;
    std::uint64_t seed = 0;
    int n_atoms = 0;
    int excitation_count = 0;
    bool truncation_warning = false;
};

// Per-atom ground truth, stored for offline oracle tests.
struct TruthRecord {
    std::vector<Vec2> positions;
    std::vector<double> outcomes;  // +-1/2, positive = |2>
};

struct ShotRecord {
    ShotMeta meta;
    ImagePair images;
    std::optional<TruthRecord> truth;
};

/// Read-side abstraction over persisted and in-memory datasets, so analysis
/// code is identical for both (and provably so: frames are float32 either way).
class ShotSource {
public:
    virtual ~ShotSource() = default;
    virtual const json& config_json() const = 0;
    virtual ImageGeometry geometry() const = 0;
    virtual std::int64_t shot_count() const = 0;
    virtual bool has_truth() const = 0;
    // Visits shots in index order.
    virtual void visit(const std::function<void(const ShotRecord&)>& fn) const = 0;
};

class MemoryDataset : public ShotSource {
public:
    MemoryDataset(json config, ImageGeometry geometry)
        : config_(std::move(config)), geometry_(geometry) {}

    void add(ShotRecord record) { shots_.push_back(std::move(record)); }

    const json& config_json() const override { return config_; }
    ImageGeometry geometry() const override { return geometry_; }
    std::int64_t shot_count() const override { return static_cast<std::int64_t>(shots_.size()); }
    const ShotMeta& meta(std::int64_t index) const {
        return shots_[static_cast<std::size_t>(index)].meta;
    }
    bool has_truth() const override {
        return !shots_.empty() && shots_.front().truth.has_value();
    }
    void visit(const std::function<void(const ShotRecord&)>& fn) const override {
        for (const ShotRecord& s : shots_) fn(s);
    }

    const std::vector<ShotRecord>& shots() const { return shots_; }

private:
    json config_;
    ImageGeometry geometry_;
    std::vector<ShotRecord> shots_;
};

namespace detail {

inline constexpr char kManifestName[] = "manifest.json";
inline constexpr char kFramesName[] = "frames.bin";
inline constexpr char kTruthName[] = "truth.bin";
inline constexpr char kFormatTag[] = "spinsplit-dataset";
inline constexpr int kFormatVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

}  // namespace detail

/// Streams shots to a dataset directory: frames.bin holds row-major
/// little-endian float32 frames (frame2 then frame1 per shot), truth.bin the
/// optional per-atom records, manifest.json everything needed to read them
/// back and to rebuild the analysis models.
class DatasetWriter {
public:
    DatasetWriter(const std::string& dir, json config, ImageGeometry geometry, bool with_truth)
        : dir_(dir), config_(std::move(config)), geometry_(geometry), with_truth_(with_truth) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        require(!ec, ErrorCategory::io, "cannot create dataset directory: " + dir);
        frames_.open(dir_ / detail::kFramesName, std::ios::binary);
        require(frames_.good(), ErrorCategory::io, "cannot open frames file for writing");
        if (with_truth_) {
            truth_.open(dir_ / detail::kTruthName, std::ios::binary);
            require(truth_.good(), ErrorCategory::io, "cannot open truth file for writing");
        }
    }

    void append(const ShotRecord& record) {
        require(!finalized_, ErrorCategory::internal, "DatasetWriter: already finalized");
        require(record.images.width == geometry_.width &&
                    record.images.height == geometry_.height,
                ErrorCategory::internal, "DatasetWriter: geometry mismatch");
        frames_.write(reinterpret_cast<const char*>(record.images.frame2.data()),
                      static_cast<std::streamsize>(record.images.frame2.size() * sizeof(float)));
        frames_.write(reinterpret_cast<const char*>(record.images.frame1.data()),
                      static_cast<std::streamsize>(record.images.frame1.size() * sizeof(float)));
        require(frames_.good(), ErrorCategory::io, "frame write failed");
        if (with_truth_) {
            require(record.truth.has_value(), ErrorCategory::internal,
                    "DatasetWriter: missing truth record");
            truth_offsets_.push_back(truth_bytes_);
            const TruthRecord& t = *record.truth;
            detail::write_pod(truth_, static_cast<std::uint32_t>(t.positions.size()));
            truth_bytes_ += sizeof(std::uint32_t);
            for (std::size_t i = 0; i < t.positions.size(); ++i) {
                detail::write_pod(truth_, t.positions[i].x);
                detail::write_pod(truth_, t.positions[i].y);
                const std::int8_t up = t.outcomes[i] > 0.0 ? 1 : -1;
                detail::write_pod(truth_, up);
                truth_bytes_ += 2 * sizeof(double) + 1;
            }
            require(truth_.good(), ErrorCategory::io, "truth write failed");
        }
        metas_.push_back(record.meta);
    }

    void finalize(std::uint64_t master_seed) {
        require(!finalized_, ErrorCategory::internal, "DatasetWriter: already finalized");
        finalized_ = true;
        frames_.close();
        if (with_truth_) truth_.close();
        json manifest;
        manifest["format"] = detail::kFormatTag;
        manifest["version"] = detail::kFormatVersion;
        manifest["geometry"] = {{"width", geometry_.width}, {"height", geometry_.height}};
        manifest["frame_dtype"] = "f32le";
        manifest["frame_order"] = {"state2", "state1"};  // per shot, row-major each
        manifest["seed"] = master_seed;
        manifest["shot_count"] = metas_.size();
        manifest["config"] = config_;
        manifest["has_truth"] = with_truth_;
        if (with_truth_) {
            manifest["truth_offsets"] = truth_offsets_;
            manifest["truth_bytes"] = truth_bytes_;
        }
        json shots = json::array();
        for (const ShotMeta& m : metas_) {
            shots.push_back({{"id", m.id},
                             {"subset", m.subset},
                             {"axis", std::string(axis_label(m.axis))},
                             {"seed", m.seed},
                             {"n", m.n_atoms},
                             {"k", m.excitation_count},
                             {"trunc", m.truncation_warning}});
        }
        manifest["shots"] = std::move(shots);
        std::ofstream out(dir_ / detail::kManifestName);
        require(out.good(), ErrorCategory::io, "cannot write manifest");
        out << manifest.dump() << '\n';
        require(out.good(), ErrorCategory::io, "manifest write failed");
    }

private:
    std::filesystem::path dir_;
    json config_;
    ImageGeometry geometry_;
    bool with_truth_;
    bool finalized_ = false;
    std::ofstream frames_;
    std::ofstream truth_;
    std::vector<ShotMeta> metas_;
    std::vector<std::uint64_t> truth_offsets_;
    std::uint64_t truth_bytes_ = 0;
};

/// Reads a persisted dataset, validating the manifest against the file
/// contents before any shot is served.
class DatasetReader : public ShotSource {
public:
    explicit DatasetReader(const std::string& dir) : dir_(dir) {
        std::ifstream in(dir_ / detail::kManifestName);
        require(in.good(), ErrorCategory::io, "cannot open manifest in " + dir);
        json manifest;
        try {
            in >> manifest;
        } catch (const json::exception& e) {
            fail(ErrorCategory::corrupt, std::string("corrupt manifest: ") + e.what());
        }
        try {
            require(manifest.at("format").get<std::string>() == detail::kFormatTag,
                    ErrorCategory::corrupt, "not a dataset manifest");
            require(manifest.at("version").get<int>() == detail::kFormatVersion,
                    ErrorCategory::corrupt, "unsupported dataset version");
            geometry_.width = manifest.at("geometry").at("width").get<int>();
            geometry_.height = manifest.at("geometry").at("height").get<int>();
            require(manifest.at("frame_dtype").get<std::string>() == "f32le",
                    ErrorCategory::corrupt, "unsupported frame dtype");
            master_seed_ = manifest.at("seed").get<std::uint64_t>();
            config_ = manifest.at("config");
            has_truth_ = manifest.value("has_truth", false);
            const auto& shots = manifest.at("shots");
            metas_.reserve(shots.size());
            for (const json& s : shots) {
                ShotMeta m;
                m.id = s.at("id").get<std::int64_t>();
                m.subset = s.at("subset").get<int>();
                m.axis = axis_from_label(s.at("axis").get<std::string>());
                m.seed = s.at("seed").get<std::uint64_t>();
                m.n_atoms = s.at("n").get<int>();
                m.excitation_count = s.at("k").get<int>();
                m.truncation_warning = s.at("trunc").get<bool>();
                metas_.push_back(m);
            }
            require(metas_.size() == manifest.at("shot_count").get<std::size_t>(),
                    ErrorCategory::corrupt, "manifest shot count mismatch");
            if (has_truth_) {
                truth_offsets_ = manifest.at("truth_offsets").get<std::vector<std::uint64_t>>();
                truth_bytes_ = manifest.at("truth_bytes").get<std::uint64_t>();
                require(truth_offsets_.size() == metas_.size(), ErrorCategory::corrupt,
                        "manifest truth offsets mismatch");
            }
        } catch (const json::exception& e) {
            fail(ErrorCategory::corrupt, std::string("corrupt manifest: ") + e.what());
        }

        const auto frames_path = dir_ / detail::kFramesName;
        std::error_code ec;
        const auto size = std::filesystem::file_size(frames_path, ec);
        require(!ec, ErrorCategory::io, "cannot stat frames file");
        const std::uint64_t expected = frame_bytes() * metas_.size();
        require(size == expected, ErrorCategory::corrupt,
                "frames file size does not match the manifest (truncated or corrupt dataset)");
        frames_.open(frames_path, std::ios::binary);
        require(frames_.good(), ErrorCategory::io, "cannot open frames file");
        if (has_truth_) {
            const auto truth_path = dir_ / detail::kTruthName;
            const auto tsize = std::filesystem::file_size(truth_path, ec);
            require(!ec, ErrorCategory::io, "cannot stat truth file");
            require(tsize == truth_bytes_, ErrorCategory::corrupt,
                    "truth file size does not match the manifest");
            truth_.open(truth_path, std::ios::binary);
            require(truth_.good(), ErrorCategory::io, "cannot open truth file");
        }
    }

    const json& config_json() const override { return config_; }
    ImageGeometry geometry() const override { return geometry_; }
    std::int64_t shot_count() const override { return static_cast<std::int64_t>(metas_.size()); }
    const ShotMeta& meta(std::int64_t index) const {
        return metas_[static_cast<std::size_t>(index)];
    }
    bool has_truth() const override { return has_truth_; }
    std::uint64_t master_seed() const { return master_seed_; }

    ImagePair read_images(std::int64_t index) const {
        ImagePair img;
        img.width = geometry_.width;
        img.height = geometry_.height;
        const std::size_t n = static_cast<std::size_t>(geometry_.pixel_count());
        img.frame2.resize(n);
        img.frame1.resize(n);
        frames_.seekg(static_cast<std::streamoff>(frame_bytes() * static_cast<std::uint64_t>(index)));
        frames_.read(reinterpret_cast<char*>(img.frame2.data()),
                     static_cast<std::streamsize>(n * sizeof(float)));
        frames_.read(reinterpret_cast<char*>(img.frame1.data()),
                     static_cast<std::streamsize>(n * sizeof(float)));
        require(frames_.good(), ErrorCategory::io, "frame read failed");
        img.truncation_warning = metas_[static_cast<std::size_t>(index)].truncation_warning;
        return img;
    }

    TruthRecord read_truth(std::int64_t index) const {
        require(has_truth_, ErrorCategory::domain, "dataset has no truth records");
        truth_.seekg(static_cast<std::streamoff>(truth_offsets_[static_cast<std::size_t>(index)]));
        const auto n = detail::read_pod<std::uint32_t>(truth_);
        TruthRecord t;
        t.positions.resize(n);
        t.outcomes.resize(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            t.positions[i].x = detail::read_pod<double>(truth_);
            t.positions[i].y = detail::read_pod<double>(truth_);
            const auto up = detail::read_pod<std::int8_t>(truth_);
            t.outcomes[i] = up > 0 ? 0.5 : -0.5;
        }
        require(truth_.good(), ErrorCategory::corrupt, "truth read failed");
        return t;
    }

    void visit(const std::function<void(const ShotRecord&)>& fn) const override {
        for (std::int64_t i = 0; i < shot_count(); ++i) {
            ShotRecord rec;
            rec.meta = metas_[static_cast<std::size_t>(i)];
            rec.images = read_images(i);
            if (has_truth_) rec.truth = read_truth(i);
            fn(rec);
        }
    }

private:
    std::uint64_t frame_bytes() const {
        return 2ULL * static_cast<std::uint64_t>(geometry_.pixel_count()) * sizeof(float);
    }

    std::filesystem::path dir_;
    json config_;
    ImageGeometry geometry_;
    std::uint64_t master_seed_ = 0;
    bool has_truth_ = false;
    std::vector<ShotMeta> metas_;
    std::vector<std::uint64_t> truth_offsets_;
    std::uint64_t truth_bytes_ = 0;
    mutable std::ifstream frames_;
    mutable std::ifstream truth_;
};

}  // namespace spinsplit
