#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "gr3d/errors.hpp"
#include "gr3d/format.hpp"
#include "gr3d/geometry.hpp"
#include "gr3d/primitives.hpp"
#include "gr3d/room.hpp"

namespace gr3d {

/// One line per object, ascending id, geometry only. Categories and other
/// semantic hints are deliberately absent: the model must reason from the
/// images and the numbers.
inline std::vector<std::string> serialize_refs(const std::vector<SceneObject>& objects,
                                               int precision) {
    std::vector<std::string> lines;
    lines.reserve(objects.size());
    for (const auto& obj : objects) {
        std::ostringstream s;
        s << "[" << obj.id << "] ";
        if (obj.kind == PrimitiveKind::Box) {
            s << "box center=(" << fixed_str(obj.box.center.x(), precision) << ","
              << fixed_str(obj.box.center.y(), precision) << ","
              << fixed_str(obj.box.center.z(), precision) << ") size=("
              << fixed_str(obj.box.size.x(), precision) << ","
              << fixed_str(obj.box.size.y(), precision) << ","
              << fixed_str(obj.box.size.z(), precision) << ")";
        } else {
            s << "cylinder center=(" << fixed_str(obj.cylinder.center.x(), precision) << ","
              << fixed_str(obj.cylinder.center.y(), precision) << ") radius="
              << fixed_str(obj.cylinder.radius, precision) << " z=["
              << fixed_str(obj.cylinder.z_min, precision) << ","
              << fixed_str(obj.cylinder.z_max, precision) << "]";
        }
        lines.push_back(s.str());
    }
    return lines;
}

namespace detail {

inline std::vector<double> parse_numbers(const std::string& text, std::size_t from,
                                         std::size_t to) {
    std::vector<double> out;
    std::stringstream ss(text.substr(from, to - from));
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw DataError("reference line: bad number \"" + item + "\"");
        }
    }
    return out;
}

inline std::vector<double> bracketed(const std::string& line, const std::string& key,
                                     char open, char close) {
    const auto at = line.find(key + std::string(1, open));
    if (at == std::string::npos) throw DataError("reference line: missing " + key);
    const auto start = at + key.size() + 1;
    const auto end = line.find(close, start);
    if (end == std::string::npos) throw DataError("reference line: unterminated " + key);
    return parse_numbers(line, start, end);
}

} // namespace detail

/// Inverse of serialize_refs, for tests and for consumers that only have the
/// prompt artifact. Ids and geometry survive; kind inferred per line.
inline std::vector<SceneObject> parse_refs(const std::vector<std::string>& lines) {
    std::vector<SceneObject> objects;
    for (const auto& line : lines) {
        if (line.empty()) continue;
        if (line.front() != '[') throw DataError("reference line: expected [id]");
        const auto rb = line.find(']');
        if (rb == std::string::npos) throw DataError("reference line: expected [id]");
        SceneObject obj;
        try {
            obj.id = std::stoi(line.substr(1, rb - 1));
        } catch (const std::exception&) {
            throw DataError("reference line: bad id");
        }
        if (line.find(" box ", rb) != std::string::npos) {
            obj.kind = PrimitiveKind::Box;
            const auto c = detail::bracketed(line, "center=", '(', ')');
            const auto s = detail::bracketed(line, "size=", '(', ')');
            if (c.size() != 3 || s.size() != 3)
                throw DataError("reference line: box needs 3-value center and size");
            obj.box.center = {c[0], c[1], c[2]};
            obj.box.size = {s[0], s[1], s[2]};
        } else if (line.find(" cylinder ", rb) != std::string::npos) {
            obj.kind = PrimitiveKind::Cylinder;
            const auto c = detail::bracketed(line, "center=", '(', ')');
            const auto z = detail::bracketed(line, "z=", '[', ']');
            if (c.size() != 2 || z.size() != 2)
                throw DataError("reference line: cylinder needs 2-value center and z");
            const auto rat = line.find("radius=");
            if (rat == std::string::npos) throw DataError("reference line: missing radius");
            try {
                obj.cylinder.radius = std::stod(line.substr(rat + 7));
            } catch (const std::exception&) {
                throw DataError("reference line: bad radius");
            }
            obj.cylinder.center = {c[0], c[1]};
            obj.cylinder.z_min = z[0];
            obj.cylinder.z_max = z[1];
        } else {
            throw DataError("reference line: unknown primitive");
        }
        objects.push_back(std::move(obj));
    }
    return objects;
}

enum class PromptMode { Full, NoAnnotation, CameraParams, SceneDescription };

inline PromptMode prompt_mode_from_string(const std::string& s) {
    if (s == "full") return PromptMode::Full;
    if (s == "no-annotation") return PromptMode::NoAnnotation;
    if (s == "camera-params") return PromptMode::CameraParams;
    if (s == "scene-description") return PromptMode::SceneDescription;
    throw ConfigError("unknown prompt mode \"" + s + "\"");
}

inline const char* prompt_mode_name(PromptMode m) {
    switch (m) {
        case PromptMode::Full: return "full";
        case PromptMode::NoAnnotation: return "no-annotation";
        case PromptMode::CameraParams: return "camera-params";
        case PromptMode::SceneDescription: return "scene-description";
    }
    return "full";
}

struct CameraRef {
    CameraIntrinsics intrinsics{1, 1, 0, 0, 1, 1};
    CameraPose pose;
};

struct PromptOptions {
    PromptMode mode = PromptMode::Full;
    int precision = 2;
    bool include_polygon = false;
    std::string question;
    std::vector<CameraRef> cameras; ///< used by camera-params mode only
};

/// Assembles the full prompt. Section order: how to read the images, the
/// coordinate conventions, the room size, the geometric references (or
/// camera parameters), then the question with the answer-format instruction.
/// Pure function: identical inputs give byte-identical output.
inline std::string build_prompt(const std::vector<std::string>& refs, const RoomBoundary& room,
                                const PromptOptions& opt) {
    std::ostringstream p;
    p << "You are looking at multiple views of one indoor scene.\n";
    switch (opt.mode) {
        case PromptMode::Full:
        case PromptMode::SceneDescription:
            p << "Each image carries numeric ID markers; a marker's number identifies the "
                 "object at that image location and cross-references the object list "
                 "below.\n";
            break;
        case PromptMode::NoAnnotation:
            p << "The images carry no markers; objects are identified only by the numeric "
                 "IDs in the object list below.\n";
            break;
        case PromptMode::CameraParams:
            p << "The images carry no markers. The camera parameters of every view are "
                 "listed below: pinhole intrinsics, then the world-to-camera rotation "
                 "(row-major) and translation.\n";
            break;
    }
    p << "All coordinates are metric (meters) in a right-handed frame: the z-axis points "
         "up and the floor is at z=0.\n";

    p << "The room covers " << fixed_str(room.area, opt.precision)
      << " square meters with a ceiling height of " << fixed_str(room.height, opt.precision)
      << " meters.";
    if (opt.include_polygon && !room.polygon.empty()) {
        p << " Floor boundary polygon: ";
        for (std::size_t i = 0; i < room.polygon.size(); ++i) {
            if (i) p << ";";
            p << "(" << fixed_str(room.polygon[i].x(), opt.precision) << ","
              << fixed_str(room.polygon[i].y(), opt.precision) << ")";
        }
        p << ".";
    }
    p << "\n";

    if (opt.mode == PromptMode::CameraParams) {
        p << "Cameras:\n";
        char buf[256];
        for (std::size_t v = 0; v < opt.cameras.size(); ++v) {
            const auto& cam = opt.cameras[v];
            std::snprintf(buf, sizeof(buf), "view %zu: fx=%.6f fy=%.6f cx=%.6f cy=%.6f R=(",
                          v, cam.intrinsics.fx, cam.intrinsics.fy, cam.intrinsics.cx,
                          cam.intrinsics.cy);
            p << buf;
            for (int row = 0; row < 3; ++row)
                for (int col = 0; col < 3; ++col) {
                    if (row + col > 0) p << ",";
                    std::snprintf(buf, sizeof(buf), "%.6f", cam.pose.R(row, col));
                    p << buf;
                }
            p << ") t=(";
            for (int k = 0; k < 3; ++k) {
                if (k) p << ",";
                std::snprintf(buf, sizeof(buf), "%.6f", cam.pose.t(k));
                p << buf;
            }
            p << ")\n";
        }
    } else {
        p << "Objects:\n";
        for (const auto& line : refs) p << line << "\n";
    }

    if (opt.mode == PromptMode::SceneDescription) {
        p << "\nDescribe the scene: mention every object in the list and what it appears "
             "to be; whenever you mention an object, its ID should be included next to "
             "the mention, like \"the low box [2]\".\n";
    }

    if (!opt.question.empty()) {
        p << "\nQuestion: " << opt.question << "\n";
        p << "Answer with a single line beginning \"ANSWER:\".\n";
    }
    return p.str();
}

} // namespace gr3d
