#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gr3d/cloud.hpp"
#include "gr3d/config.hpp"
#include "gr3d/errors.hpp"
#include "gr3d/format.hpp"
#include "gr3d/manifest.hpp"
#include "gr3d/primitives.hpp"
#include "gr3d/room.hpp"
#include "gr3d/voxel.hpp"

namespace gr3d {

/// Label ids of the structural categories, resolved against a manifest's
/// label table.
struct StructuralLabels {
    std::set<int> floor, wall, ceiling;

    bool is_structural(int label) const {
        return floor.count(label) || wall.count(label) || ceiling.count(label);
    }
};

inline StructuralLabels resolve_structural_labels(const std::map<int, std::string>& labels,
                                                  const PipelineConfig& cfg) {
    StructuralLabels out;
    for (const auto& [id, name] : labels) {
        if (cfg.floor_categories.count(name)) out.floor.insert(id);
        if (cfg.wall_categories.count(name)) out.wall.insert(id);
        if (cfg.ceiling_categories.count(name)) out.ceiling.insert(id);
    }
    if (out.floor.empty())
        throw DataError("extract: no label maps to a floor category");
    return out;
}

/// Everything the downstream stages consume: the recon-to-metric alignment,
/// the room boundary, and the fitted objects with ids 1..N in deterministic
/// cluster order.
struct ExtractionResult {
    SceneAlignment alignment;
    RoomBoundary room;
    std::vector<SceneObject> objects;
};

/// Core of the extraction stage, independent of where the cloud came from.
/// `reference_heights` overrides the config's table when non-empty.
inline ExtractionResult extract_from_cloud(const LabeledPointCloud& cloud,
                                           const std::map<int, std::string>& labels,
                                           const std::map<std::string, double>& reference_heights,
                                           const PipelineConfig& cfg) {
    const StructuralLabels structural = resolve_structural_labels(labels, cfg);

    const Vec3 up = estimate_up(cloud, structural.floor);
    const double yaw_deg = estimate_dominant_direction(cloud, structural.wall, cfg.neighbor_radius);
    const AxisAlignResult aligned = axis_align(cloud, up, yaw_deg, structural.floor);

    const auto& refs = reference_heights.empty() ? cfg.reference_heights : reference_heights;
    const ScaleEstimate scale =
        recover_scale(aligned.cloud, labels, refs, cfg.min_category_points);

    ExtractionResult result;
    result.alignment.rotation = aligned.rotation;
    result.alignment.z_offset = aligned.z_offset;
    result.alignment.scale = scale.scale;
    result.alignment.provenance = scale.provenance;
    result.alignment.scale_warning = scale.warning;

    LabeledPointCloud metric = aligned.cloud;
    for (auto& pt : metric.points) pt.position *= scale.scale;

    const VoxelGrid grid = voxelize(metric, cfg.voxel_size, cfg.min_points_per_voxel);
    result.room = extract_room(grid, structural.floor, structural.wall);

    int next_id = 1;
    for (const auto& cluster : find_clusters(grid, cfg.min_voxels_per_object)) {
        if (structural.is_structural(cluster.label)) continue;
        auto it = labels.find(cluster.label);
        if (it == labels.end()) continue;
        const auto members = cluster_member_points(metric, grid, cluster);
        if (members.empty()) continue;
        SceneObject obj = choose_primitive(next_id, it->second, members, cfg.voxel_size,
                                           cfg.round_categories, cfg.cylinder_residual_threshold);
        obj.label = cluster.label;
        obj.voxel_count = cluster.cells.size();
        result.objects.push_back(std::move(obj));
        ++next_id;
    }
    return result;
}

inline ExtractionResult extract_scene(const SceneManifest& manifest, const PipelineConfig& cfg,
                                      int threads = 1) {
    const LabeledPointCloud cloud = build_cloud(manifest, cfg.stride, threads);
    return extract_from_cloud(cloud, manifest.labels, manifest.reference_heights, cfg);
}

// ---------------------------------------------------------------------------
// Objects file: the text artifact consumed by the annotator and the prompt
// builder. Geometry uses fixed decimals; alignment parameters round-trip
// exactly because the annotator must invert them.

inline void write_objects(std::ostream& out, const ExtractionResult& r,
                          const std::string& config_hash, int precision) {
    out << "# gr3d objects v1\n";
    out << "# config_hash=" << config_hash << "\n";

    out << "alignment rotation=(";
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 3; ++col) {
            if (row + col > 0) out << ",";
            out << exact_str(r.alignment.rotation(row, col));
        }
    out << ") z_offset=" << exact_str(r.alignment.z_offset)
        << " scale=" << exact_str(r.alignment.scale)
        << " warning=" << (r.alignment.scale_warning ? 1 : 0) << "\n";

    out << "alignment_source ";
    if (r.alignment.provenance.empty()) {
        out << "none";
    } else {
        bool first = true;
        for (const auto& [category, count] : r.alignment.provenance) {
            if (!first) out << ",";
            out << category << ":" << count;
            first = false;
        }
    }
    out << "\n";

    out << "room area=" << fixed_str(r.room.area, precision)
        << " height=" << fixed_str(r.room.height, precision) << " polygon=";
    for (std::size_t i = 0; i < r.room.polygon.size(); ++i) {
        if (i) out << ";";
        out << "(" << fixed_str(r.room.polygon[i].x(), precision) << ","
            << fixed_str(r.room.polygon[i].y(), precision) << ")";
    }
    out << "\n";

    for (const auto& obj : r.objects) {
        out << "object id=" << obj.id
            << " kind=" << (obj.kind == PrimitiveKind::Box ? "box" : "cylinder")
            << " label=" << obj.label << " voxels=" << obj.voxel_count
            << " points=" << obj.point_count;
        if (obj.kind == PrimitiveKind::Box) {
            out << " center=(" << fixed_str(obj.box.center.x(), precision) << ","
                << fixed_str(obj.box.center.y(), precision) << ","
                << fixed_str(obj.box.center.z(), precision) << ")"
                << " size=(" << fixed_str(obj.box.size.x(), precision) << ","
                << fixed_str(obj.box.size.y(), precision) << ","
                << fixed_str(obj.box.size.z(), precision) << ")";
        } else {
            out << " center=(" << fixed_str(obj.cylinder.center.x(), precision) << ","
                << fixed_str(obj.cylinder.center.y(), precision) << ")"
                << " radius=" << fixed_str(obj.cylinder.radius, precision)
                << " z=(" << fixed_str(obj.cylinder.z_min, precision) << ","
                << fixed_str(obj.cylinder.z_max, precision) << ")";
        }
        out << "\n";
    }
}

inline void write_objects(const fs::path& path, const ExtractionResult& r,
                          const std::string& config_hash, int precision) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write objects file: " + path.string());
    write_objects(out, r, config_hash, precision);
}

struct ObjectsFile {
    std::string config_hash;
    ExtractionResult result;
};

namespace detail {

inline std::vector<double> parse_tuple(const std::string& value, const std::string& ctx) {
    if (value.size() < 2 || value.front() != '(' || value.back() != ')')
        throw DataError("objects file: malformed tuple in " + ctx);
    std::vector<double> out;
    std::stringstream ss(value.substr(1, value.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw DataError("objects file: bad number in " + ctx);
        }
    }
    return out;
}

/// Splits "key=value key=value ..." after the line tag.
inline std::map<std::string, std::string> parse_fields(const std::string& line,
                                                       std::size_t from) {
    std::map<std::string, std::string> fields;
    std::stringstream ss(line.substr(from));
    std::string token;
    while (ss >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos)
            throw DataError("objects file: expected key=value, got \"" + token + "\"");
        fields[token.substr(0, eq)] = token.substr(eq + 1);
    }
    return fields;
}

inline const std::string& field(const std::map<std::string, std::string>& fields,
                                const std::string& key, const std::string& ctx) {
    auto it = fields.find(key);
    if (it == fields.end()) throw DataError("objects file: missing " + key + " in " + ctx);
    return it->second;
}

} // namespace detail

inline ObjectsFile load_objects(std::istream& in) {
    ObjectsFile file;
    std::string line;
    if (!std::getline(in, line) || line != "# gr3d objects v1")
        throw DataError("objects file: bad header");
    if (!std::getline(in, line) || line.rfind("# config_hash=", 0) != 0)
        throw DataError("objects file: missing config hash");
    file.config_hash = line.substr(std::string("# config_hash=").size());

    bool saw_alignment = false, saw_room = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto space = line.find(' ');
        const std::string tag = line.substr(0, space);
        if (tag == "alignment") {
            const auto fields = detail::parse_fields(line, space);
            const auto rot = detail::parse_tuple(detail::field(fields, "rotation", tag), tag);
            if (rot.size() != 9) throw DataError("objects file: rotation needs 9 values");
            for (int row = 0; row < 3; ++row)
                for (int col = 0; col < 3; ++col)
                    file.result.alignment.rotation(row, col) = rot[3 * row + col];
            file.result.alignment.z_offset = std::stod(detail::field(fields, "z_offset", tag));
            file.result.alignment.scale = std::stod(detail::field(fields, "scale", tag));
            file.result.alignment.scale_warning =
                detail::field(fields, "warning", tag) == "1";
            saw_alignment = true;
        } else if (tag == "alignment_source") {
            const std::string rest = space == std::string::npos ? "" : line.substr(space + 1);
            if (rest != "none" && !rest.empty()) {
                std::stringstream ss(rest);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    const auto colon = item.find(':');
                    if (colon == std::string::npos)
                        throw DataError("objects file: malformed alignment_source");
                    file.result.alignment.provenance.emplace_back(
                        item.substr(0, colon), std::stoul(item.substr(colon + 1)));
                }
            }
        } else if (tag == "room") {
            const auto fields = detail::parse_fields(line, space);
            file.result.room.area = std::stod(detail::field(fields, "area", tag));
            file.result.room.height = std::stod(detail::field(fields, "height", tag));
            std::stringstream ss(detail::field(fields, "polygon", tag));
            std::string vertex;
            while (std::getline(ss, vertex, ';')) {
                const auto xy = detail::parse_tuple(vertex, "room polygon");
                if (xy.size() != 2) throw DataError("objects file: polygon vertex needs 2 values");
                file.result.room.polygon.push_back({xy[0], xy[1]});
            }
            saw_room = true;
        } else if (tag == "object") {
            const auto fields = detail::parse_fields(line, space);
            SceneObject obj;
            obj.id = std::stoi(detail::field(fields, "id", tag));
            obj.label = std::stoi(detail::field(fields, "label", tag));
            obj.voxel_count = std::stoul(detail::field(fields, "voxels", tag));
            obj.point_count = std::stoul(detail::field(fields, "points", tag));
            const std::string& kind = detail::field(fields, "kind", tag);
            if (kind == "box") {
                obj.kind = PrimitiveKind::Box;
                const auto c = detail::parse_tuple(detail::field(fields, "center", tag), tag);
                const auto s = detail::parse_tuple(detail::field(fields, "size", tag), tag);
                if (c.size() != 3 || s.size() != 3)
                    throw DataError("objects file: box needs 3-value center and size");
                obj.box.center = {c[0], c[1], c[2]};
                obj.box.size = {s[0], s[1], s[2]};
            } else if (kind == "cylinder") {
                obj.kind = PrimitiveKind::Cylinder;
                const auto c = detail::parse_tuple(detail::field(fields, "center", tag), tag);
                const auto z = detail::parse_tuple(detail::field(fields, "z", tag), tag);
                if (c.size() != 2 || z.size() != 2)
                    throw DataError("objects file: cylinder needs 2-value center and z");
                obj.cylinder.center = {c[0], c[1]};
                obj.cylinder.radius = std::stod(detail::field(fields, "radius", tag));
                obj.cylinder.z_min = z[0];
                obj.cylinder.z_max = z[1];
            } else {
                throw DataError("objects file: unknown kind \"" + kind + "\"");
            }
            file.result.objects.push_back(std::move(obj));
        } else {
            throw DataError("objects file: unknown line tag \"" + tag + "\"");
        }
    }
    if (!saw_alignment || !saw_room)
        throw DataError("objects file: missing alignment or room line");
    return file;
}

inline ObjectsFile load_objects(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open objects file: " + path.string());
    return load_objects(in);
}

} // namespace gr3d
