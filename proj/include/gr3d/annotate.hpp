#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "gr3d/cloud.hpp"
#include "gr3d/errors.hpp"
#include "gr3d/geometry.hpp"
#include "gr3d/primitives.hpp"
#include "gr3d/raster.hpp"

namespace gr3d {

enum class CullReason { None, BehindCamera, OutOfBounds, Occluded };

inline const char* cull_reason_name(CullReason r) {
    switch (r) {
        case CullReason::None: return "none";
        case CullReason::BehindCamera: return "behind-camera";
        case CullReason::OutOfBounds: return "out-of-bounds";
        case CullReason::Occluded: return "occluded";
    }
    return "none";
}

struct Annotation {
    int object_id = 0;
    double pixel_i = 0.0, pixel_j = 0.0; ///< continuous projection
    long round_i = -1, round_j = -1;
    double z = 0.0;          ///< center depth, reconstruction units
    double surface = -1.0;   ///< depth-map value at the rounded pixel, < 0 if invalid
    double tau = 0.0;        ///< occlusion tolerance, reconstruction units
    bool culled = false;
    CullReason reason = CullReason::None;
};

/// Half the space diagonal of the primitive's bounding box: how much deeper
/// than the visible surface an interior center may legitimately sit.
inline double half_diagonal(const SceneObject& obj) {
    if (obj.kind == PrimitiveKind::Box) return 0.5 * obj.box.size.norm();
    const Vec3 bbox{2.0 * obj.cylinder.radius, 2.0 * obj.cylinder.radius,
                    obj.cylinder.z_max - obj.cylinder.z_min};
    return 0.5 * bbox.norm();
}

/// Projects each object center into the frame and culls it when the camera
/// cannot see it: behind the camera, outside the image, or deeper than the
/// depth map allows. The depth comparison is the only occlusion test; no
/// geometry is rendered. Invalid depth pixels never cull.
inline std::vector<Annotation> annotate_frame(const std::vector<SceneObject>& objects,
                                              const SceneAlignment& alignment,
                                              const CameraIntrinsics& intrinsics,
                                              const CameraPose& pose, const DepthMap& depth,
                                              double tau_floor_m = 0.1) {
    std::vector<Annotation> out;
    out.reserve(objects.size());
    for (const auto& obj : objects) {
        Annotation a;
        a.object_id = obj.id;
        const double tau_m = std::max(tau_floor_m, half_diagonal(obj));
        a.tau = tau_m / alignment.scale;

        const Vec3 center_recon = alignment.to_recon(obj.center());
        const auto proj = project(center_recon, pose, intrinsics);
        if (!proj) {
            a.culled = true;
            a.reason = CullReason::BehindCamera;
            out.push_back(a);
            continue;
        }
        a.pixel_i = proj->pixel.i;
        a.pixel_j = proj->pixel.j;
        a.z = proj->z;
        a.round_i = std::lround(proj->pixel.i);
        a.round_j = std::lround(proj->pixel.j);
        if (a.round_i < 0 || a.round_j < 0 || a.round_i >= intrinsics.width ||
            a.round_j >= intrinsics.height) {
            a.culled = true;
            a.reason = CullReason::OutOfBounds;
            out.push_back(a);
            continue;
        }
        const int pi = static_cast<int>(a.round_i), pj = static_cast<int>(a.round_j);
        if (depth.is_valid(pi, pj)) {
            a.surface = depth.at(pi, pj);
            if (a.z > a.surface + a.tau) {
                a.culled = true;
                a.reason = CullReason::Occluded;
            }
        }
        out.push_back(a);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Rendering

struct MarkerStyle {
    int disk_radius = 3;
    int glyph_scale = 1; ///< integer upscaling of the 5x7 digit font
};

struct PlacedMarker {
    int object_id = 0;
    int box_x0 = 0, box_y0 = 0, box_x1 = 0, box_y1 = 0; ///< inclusive label box
    bool nudged = false;

    bool overlaps(const PlacedMarker& o) const {
        return box_x0 <= o.box_x1 && o.box_x0 <= box_x1 && box_y0 <= o.box_y1 &&
               o.box_y0 <= box_y1;
    }
};

namespace detail {

/// 5x7 digit bitmaps, row-major, '#' = on.
inline const std::array<const char*, 10>& digit_font() {
    static const std::array<const char*, 10> font = {
        ".###."
        "#...#"
        "#..##"
        "#.#.#"
        "##..#"
        "#...#"
        ".###.",
        "..#.."
        ".##.."
        "..#.."
        "..#.."
        "..#.."
        "..#.."
        ".###.",
        ".###."
        "#...#"
        "....#"
        "...#."
        "..#.."
        ".#..."
        "#####",
        "#####"
        "...#."
        "..#.."
        "...#."
        "....#"
        "#...#"
        ".###.",
        "...#."
        "..##."
        ".#.#."
        "#..#."
        "#####"
        "...#."
        "...#.",
        "#####"
        "#...."
        "####."
        "....#"
        "....#"
        "#...#"
        ".###.",
        "..##."
        ".#..."
        "#...."
        "####."
        "#...#"
        "#...#"
        ".###.",
        "#####"
        "....#"
        "...#."
        "..#.."
        ".#..."
        ".#..."
        ".#...",
        ".###."
        "#...#"
        "#...#"
        ".###."
        "#...#"
        "#...#"
        ".###.",
        ".###."
        "#...#"
        "#...#"
        ".####"
        "....#"
        "...#."
        ".##..",
    };
    return font;
}

inline void fill_rect(ImageRgb8& img, int x0, int y0, int x1, int y1, std::uint8_t r,
                      std::uint8_t g, std::uint8_t b) {
    for (int y = std::max(0, y0); y <= std::min(img.height - 1, y1); ++y)
        for (int x = std::max(0, x0); x <= std::min(img.width - 1, x1); ++x)
            img.set(x, y, r, g, b);
}

inline void draw_disk(ImageRgb8& img, int cx, int cy, int radius, std::uint8_t r,
                      std::uint8_t g, std::uint8_t b) {
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy > radius * radius) continue;
            const int x = cx + dx, y = cy + dy;
            if (x >= 0 && y >= 0 && x < img.width && y < img.height) img.set(x, y, r, g, b);
        }
}

inline void draw_digits(ImageRgb8& img, const std::string& text, int x0, int y0, int scale) {
    int pen = x0;
    for (char ch : text) {
        if (ch < '0' || ch > '9') continue;
        const char* glyph = digit_font()[ch - '0'];
        for (int row = 0; row < 7; ++row)
            for (int col = 0; col < 5; ++col) {
                if (glyph[row * 5 + col] != '#') continue;
                fill_rect(img, pen + col * scale, y0 + row * scale, pen + col * scale + scale - 1,
                          y0 + row * scale + scale - 1, 0, 0, 0);
            }
        pen += 6 * scale;
    }
}

/// Distinct, saturated marker colors cycling by object id.
inline void marker_color(int id, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
    static const std::array<std::array<std::uint8_t, 3>, 8> palette = {{{230, 60, 50},
                                                                        {50, 120, 230},
                                                                        {40, 170, 80},
                                                                        {240, 160, 30},
                                                                        {160, 70, 200},
                                                                        {30, 190, 190},
                                                                        {220, 80, 160},
                                                                        {150, 150, 40}}};
    const auto& c = palette[static_cast<std::size_t>(id > 0 ? (id - 1) % 8 : 0)];
    r = c[0];
    g = c[1];
    b = c[2];
}

} // namespace detail

/// Draws every non-culled annotation: a colored disk at the projected pixel
/// plus the decimal id in a white box with a black border. Overlapping boxes
/// are nudged through 8 directions x 3 steps; if everything overlaps the box
/// is drawn at its original spot anyway. Returns placement metadata.
inline std::vector<PlacedMarker> render_annotations(ImageRgb8& image,
                                                    const std::vector<Annotation>& annotations,
                                                    const MarkerStyle& style = {}) {
    std::vector<PlacedMarker> placed;
    for (const auto& a : annotations) {
        if (a.culled) continue;
        const int cx = static_cast<int>(a.round_i), cy = static_cast<int>(a.round_j);
        const std::string text = std::to_string(a.object_id);
        const int glyph_w = 6 * style.glyph_scale;
        const int text_w = glyph_w * static_cast<int>(text.size()) - style.glyph_scale;
        const int text_h = 7 * style.glyph_scale;
        const int pad = 2;
        const int box_w = text_w + 2 * pad + 2; // content + padding + 1 px border
        const int box_h = text_h + 2 * pad + 2;

        PlacedMarker m;
        m.object_id = a.object_id;
        auto place_at = [&](int px, int py) {
            m.box_x0 = px - box_w / 2;
            m.box_y0 = py - box_h / 2;
            m.box_x1 = m.box_x0 + box_w - 1;
            m.box_y1 = m.box_y0 + box_h - 1;
        };
        place_at(cx, cy);

        auto collides = [&]() {
            for (const auto& other : placed)
                if (m.overlaps(other)) return true;
            return false;
        };
        if (collides()) {
            static const int dirs[8][2] = {{1, 0},  {0, 1},  {-1, 0}, {0, -1},
                                           {1, 1},  {-1, 1}, {-1, -1}, {1, -1}};
            const int stride = box_h + 1;
            bool found = false;
            for (int step = 1; step <= 3 && !found; ++step)
                for (const auto& d : dirs) {
                    place_at(cx + d[0] * step * stride, cy + d[1] * step * stride);
                    if (!collides()) {
                        m.nudged = true;
                        found = true;
                        break;
                    }
                }
            if (!found) place_at(cx, cy); // draw anyway
        }

        std::uint8_t r, g, b;
        detail::marker_color(a.object_id, r, g, b);
        detail::draw_disk(image, cx, cy, style.disk_radius, r, g, b);
        detail::fill_rect(image, m.box_x0, m.box_y0, m.box_x1, m.box_y1, 0, 0, 0);
        detail::fill_rect(image, m.box_x0 + 1, m.box_y0 + 1, m.box_x1 - 1, m.box_y1 - 1, 255,
                          255, 255);
        detail::draw_digits(image, text, m.box_x0 + 1 + pad, m.box_y0 + 1 + pad,
                            style.glyph_scale);
        placed.push_back(m);
    }
    return placed;
}

/// Per-frame sidecar, one line per object: id, continuous pixel, culled flag,
/// reason. Kept textual for tests and debugging.
inline void write_annotation_sidecar(const fs::path& path,
                                     const std::vector<Annotation>& annotations) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write annotation sidecar: " + path.string());
    out << "# id i j culled reason\n";
    char buf[160];
    for (const auto& a : annotations) {
        std::snprintf(buf, sizeof(buf), "%d %.2f %.2f %d %s\n", a.object_id, a.pixel_i,
                      a.pixel_j, a.culled ? 1 : 0, cull_reason_name(a.reason));
        out << buf;
    }
}

} // namespace gr3d
