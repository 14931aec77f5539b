#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gr3d/errors.hpp"
#include "gr3d/geometry.hpp"
#include "gr3d/raster.hpp"

namespace gr3d {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// One input view: raster paths plus calibration. Raster dimensions must
/// match the intrinsics; checked at manifest load.
struct Frame {
    fs::path image_path;
    fs::path depth_path;
    fs::path label_path;
    CameraIntrinsics intrinsics;
    CameraPose pose; ///< world -> camera
};

/// The ingestion contract: everything the pipeline needs to know about a
/// reconstructed scene, produced upstream (reconstruction + 2D segmentation)
/// or by the synthetic generator.
struct SceneManifest {
    std::string scene_id;
    std::string handedness = "right";
    double depth_scale = 0.001; ///< raw depth value * depth_scale = depth units
    std::map<int, std::string> labels;            ///< label id -> category name
    std::map<std::string, double> reference_heights; ///< category -> meters
    std::vector<Frame> frames;
    fs::path base_dir; ///< directory the manifest was loaded from
};

/// Depth raster decode: 16-bit PNG or raw float (by extension), raw value
/// times `scale` = depth; zero / non-finite raw values are invalid pixels.
inline DepthMap decode_depth(const fs::path& path, double scale) {
    DepthMap dm;
    if (path.extension() == ".fraw") {
        const RasterF32 raw = read_fraw(path);
        dm = DepthMap(raw.width, raw.height);
        for (int j = 0; j < raw.height; ++j)
            for (int i = 0; i < raw.width; ++i)
                dm.set(i, j, static_cast<double>(raw.at(i, j)) * scale);
    } else {
        const RasterU16 raw = read_png_gray16(path);
        dm = DepthMap(raw.width, raw.height);
        for (int j = 0; j < raw.height; ++j)
            for (int i = 0; i < raw.width; ++i)
                dm.set(i, j, static_cast<double>(raw.at(i, j)) * scale);
    }
    return dm;
}

inline void encode_depth(const fs::path& path, const DepthMap& dm, double scale) {
    if (path.extension() == ".fraw") {
        RasterF32 raw(dm.width, dm.height);
        for (int j = 0; j < dm.height; ++j)
            for (int i = 0; i < dm.width; ++i)
                raw.set(i, j, dm.is_valid(i, j)
                                  ? static_cast<float>(dm.at(i, j) / scale)
                                  : 0.f);
        write_fraw(path, raw);
    } else {
        RasterU16 raw(dm.width, dm.height);
        for (int j = 0; j < dm.height; ++j)
            for (int i = 0; i < dm.width; ++i) {
                double v = dm.is_valid(i, j) ? std::round(dm.at(i, j) / scale) : 0.0;
                if (v < 0) v = 0;
                if (v > 65535) v = 65535;
                raw.set(i, j, static_cast<std::uint16_t>(v));
            }
        write_png_gray16(path, raw);
    }
}

/// Label rasters are 16-bit PNG of label ids; id 0 is "unlabeled".
inline RasterU16 decode_labels(const fs::path& path) { return read_png_gray16(path); }
inline void encode_labels(const fs::path& path, const RasterU16& ras) {
    write_png_gray16(path, ras);
}

/// Decoded per-frame rasters.
struct FrameData {
    DepthMap depth;
    RasterU16 labels;
};

inline FrameData load_frame_data(const SceneManifest& m, std::size_t frame_index) {
    const Frame& f = m.frames.at(frame_index);
    return {decode_depth(f.depth_path, m.depth_scale), decode_labels(f.label_path)};
}

namespace detail {

inline double get_number(const json& j, const char* key, const std::string& ctx) {
    if (!j.contains(key) || !j[key].is_number())
        throw DataError(ctx + ": missing or non-numeric '" + key + "'");
    return j[key].get<double>();
}

inline std::vector<double> get_array(const json& j, const char* key, std::size_t n,
                                     const std::string& ctx) {
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != n)
        throw DataError(ctx + ": '" + key + "' must be an array of " +
                        std::to_string(n) + " numbers");
    std::vector<double> v;
    v.reserve(n);
    for (const auto& e : j[key]) {
        if (!e.is_number()) throw DataError(ctx + ": non-numeric entry in '" + key + "'");
        v.push_back(e.get<double>());
    }
    return v;
}

} // namespace detail

/// Loads and fully validates a manifest. Nothing is silently repaired: any
/// inconsistency throws a DataError naming the offending frame.
inline SceneManifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("manifest parse error in " + path.string() + ": " + e.what());
    }

    SceneManifest m;
    m.base_dir = path.parent_path();
    if (!j.contains("scene_id") || !j["scene_id"].is_string())
        throw DataError("manifest: missing 'scene_id'");
    m.scene_id = j["scene_id"].get<std::string>();
    m.handedness = j.value("handedness", std::string("right"));
    m.depth_scale = j.value("depth_scale", 0.001);
    if (!(m.depth_scale > 0)) throw DataError("manifest: depth_scale must be positive");

    if (j.contains("labels")) {
        for (const auto& [key, val] : j["labels"].items()) {
            int id = 0;
            try {
                id = std::stoi(key);
            } catch (...) {
                throw DataError("manifest: non-integer label id '" + key + "'");
            }
            if (id == 0) throw DataError("manifest: label id 0 is reserved for unlabeled");
            if (!val.is_string()) throw DataError("manifest: label name must be a string");
            if (!m.labels.emplace(id, val.get<std::string>()).second)
                throw DataError("manifest: duplicate label id " + std::to_string(id));
        }
    }
    if (j.contains("reference_heights")) {
        for (const auto& [key, val] : j["reference_heights"].items()) {
            if (!val.is_number() || !(val.get<double>() > 0))
                throw DataError("manifest: reference height for '" + key +
                                "' must be positive");
            m.reference_heights[key] = val.get<double>();
        }
    }

    if (!j.contains("frames") || !j["frames"].is_array() || j["frames"].empty())
        throw DataError("manifest: needs at least one frame");

    int index = 0;
    for (const auto& fj : j["frames"]) {
        const std::string ctx = "frame " + std::to_string(index);
        Frame f;
        for (const char* key : {"image", "depth", "label"})
            if (!fj.contains(key) || !fj[key].is_string())
                throw DataError(ctx + ": missing '" + std::string(key) + "' path");
        f.image_path = m.base_dir / fj["image"].get<std::string>();
        f.depth_path = m.base_dir / fj["depth"].get<std::string>();
        f.label_path = m.base_dir / fj["label"].get<std::string>();
        for (const auto& p : {f.image_path, f.depth_path, f.label_path})
            if (!fs::exists(p)) throw DataError(ctx + ": file not found: " + p.string());

        const int w = static_cast<int>(detail::get_number(fj, "width", ctx));
        const int h = static_cast<int>(detail::get_number(fj, "height", ctx));
        const auto K = detail::get_array(fj, "K", 9, ctx);
        if (K[1] != 0 || K[3] != 0 || K[6] != 0 || K[7] != 0 || K[8] != 1)
            throw DataError(ctx + ": K must be [fx 0 cx; 0 fy cy; 0 0 1] row-major");
        try {
            f.intrinsics = CameraIntrinsics(K[0], K[4], K[2], K[5], w, h);
        } catch (const std::invalid_argument& e) {
            throw DataError(ctx + ": " + e.what());
        }
        const auto Rt = detail::get_array(fj, "Rt", 12, ctx);
        Mat3 R;
        Vec3 t;
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) R(r, c) = Rt[4 * r + c];
            t(r) = Rt[4 * r + 3];
        }
        try {
            f.pose = CameraPose(R, t);
        } catch (const std::invalid_argument& e) {
            throw DataError(ctx + ": " + e.what());
        }

        // Raster consistency: dimensions match the intrinsics and every label
        // id actually appears in the label table.
        const DepthMap dm = decode_depth(f.depth_path, m.depth_scale);
        if (dm.width != w || dm.height != h)
            throw DataError(ctx + ": depth raster is " + std::to_string(dm.width) + "x" +
                            std::to_string(dm.height) + " but intrinsics say " +
                            std::to_string(w) + "x" + std::to_string(h));
        const RasterU16 lab = decode_labels(f.label_path);
        if (lab.width != w || lab.height != h)
            throw DataError(ctx + ": label raster dimension mismatch");
        for (const std::uint16_t v : lab.data)
            if (v != 0 && !m.labels.count(v))
                throw DataError(ctx + ": unknown label id " + std::to_string(v) +
                                " in label raster");
        const ImageRgb8 img = read_png_rgb8(f.image_path);
        if (img.width != w || img.height != h)
            throw DataError(ctx + ": image dimension mismatch");

        m.frames.push_back(std::move(f));
        ++index;
    }
    return m;
}

/// Serializes a manifest next to its rasters (paths stored relative).
inline void save_manifest(const SceneManifest& m, const fs::path& path) {
    json j;
    j["scene_id"] = m.scene_id;
    j["handedness"] = m.handedness;
    j["depth_scale"] = m.depth_scale;
    json labels = json::object();
    for (const auto& [id, name] : m.labels) labels[std::to_string(id)] = name;
    j["labels"] = labels;
    json refs = json::object();
    for (const auto& [name, height] : m.reference_heights) refs[name] = height;
    j["reference_heights"] = refs;
    j["frames"] = json::array();
    for (const Frame& f : m.frames) {
        json fj;
        fj["image"] = f.image_path.filename().string();
        fj["depth"] = f.depth_path.filename().string();
        fj["label"] = f.label_path.filename().string();
        fj["width"] = f.intrinsics.width;
        fj["height"] = f.intrinsics.height;
        fj["K"] = {f.intrinsics.fx, 0.0, f.intrinsics.cx,
                   0.0, f.intrinsics.fy, f.intrinsics.cy,
                   0.0, 0.0, 1.0};
        json rt = json::array();
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) rt.push_back(f.pose.R(r, c));
            rt.push_back(f.pose.t(r));
        }
        fj["Rt"] = rt;
        j["frames"].push_back(fj);
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    out << j.dump(2) << "\n";
}

} // namespace gr3d
