#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gr3d/errors.hpp"
#include "gr3d/geometry.hpp"
#include "gr3d/manifest.hpp"
#include "gr3d/primitives.hpp"
#include "gr3d/raster.hpp"
#include "gr3d/rng.hpp"

namespace gr3d::synth {

inline constexpr int kFloorLabel = 1;
inline constexpr int kWallLabel = 2;
inline constexpr int kCeilingLabel = 3;

/// Fixed category registry shared by generator, renderer, and exported
/// manifests. Box categories get ids 10+, cylinder categories 20+.
inline const std::map<std::string, int>& category_labels() {
    static const std::map<std::string, int> table = {
        {"floor", kFloorLabel}, {"wall", kWallLabel},   {"ceiling", kCeilingLabel},
        {"crate", 10},          {"cabinet", 11},        {"sofa", 12},
        {"chair", 13},          {"bed", 14},            {"desk", 15},
        {"countertop", 16},     {"round_table", 20},    {"column", 21},
        {"trash_bin", 22},      {"stool", 23},
    };
    return table;
}

inline const std::vector<std::string>& box_categories() {
    static const std::vector<std::string> v = {"crate", "cabinet", "sofa",  "chair",
                                               "bed",   "desk",    "countertop"};
    return v;
}

inline const std::vector<std::string>& cylinder_categories() {
    static const std::vector<std::string> v = {"round_table", "column", "trash_bin", "stool"};
    return v;
}

inline void palette_color(int label, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
    switch (label) {
        case kFloorLabel: r = 120; g = 110; b = 95; return;
        case kWallLabel: r = 200; g = 198; b = 190; return;
        case kCeilingLabel: r = 235; g = 235; b = 230; return;
        case 10: r = 170; g = 120; b = 60; return;
        case 11: r = 90; g = 70; b = 50; return;
        case 12: r = 60; g = 90; b = 150; return;
        case 13: r = 180; g = 60; b = 50; return;
        case 14: r = 110; g = 150; b = 110; return;
        case 15: r = 140; g = 100; b = 70; return;
        case 16: r = 160; g = 160; b = 165; return;
        case 20: r = 150; g = 110; b = 160; return;
        case 21: r = 175; g = 175; b = 170; return;
        case 22: r = 70; g = 110; b = 110; return;
        case 23: r = 200; g = 150; b = 60; return;
        default: r = 128; g = 128; b = 128; return;
    }
}

/// Interior = union of axis-aligned xy rectangles extruded z in [0, height].
/// rects[0] is the full-footprint rectangle; an L room adds a second,
/// overlapping rectangle so the union forms the L.
struct SynthRoom {
    std::vector<std::pair<Vec2, Vec2>> rects; ///< (min, max) per rectangle
    double height = 2.5;
    std::vector<Vec2> polygon; ///< CCW footprint boundary
    double area = 0.0;

    /// Conservative: true when the margin-shrunk version of some rectangle
    /// contains p. Near the L seam this under-approximates the interior,
    /// which only makes placement sampling stricter.
    bool contains_xy(const Vec2& p, double margin = 0.0) const {
        for (const auto& [lo, hi] : rects)
            if (p.x() >= lo.x() + margin && p.x() <= hi.x() - margin &&
                p.y() >= lo.y() + margin && p.y() <= hi.y() - margin)
                return true;
        return false;
    }
    bool contains_rect_xy(const Vec2& lo, const Vec2& hi, double margin = 0.0) const {
        for (const auto& [rlo, rhi] : rects)
            if (lo.x() >= rlo.x() + margin && hi.x() <= rhi.x() - margin &&
                lo.y() >= rlo.y() + margin && hi.y() <= rhi.y() - margin)
                return true;
        return false;
    }
};

struct SynthCamera {
    CameraIntrinsics intrinsics{200, 200, 160, 120, 320, 240};
    CameraPose pose;
};

struct SynthScene {
    std::uint64_t seed = 0;
    SynthRoom room;
    std::vector<SceneObject> objects; ///< ground truth, ids 1..N, distinct categories
    std::vector<SynthCamera> cameras;
    std::map<int, std::string> labels; ///< label id -> category, structural included
};

struct SynthParams {
    int n_boxes = 3;
    int n_cylinders = 2;
    int n_cameras = 6;
    int image_width = 320;
    int image_height = 240;
    double focal = 200.0; ///< same field of view as 160 at 256x192, finer pixels
    double l_shape_prob = 0.4;
    double room_w_min = 3.5, room_w_max = 6.0;
    double room_d_min = 3.5, room_d_max = 6.0;
    double room_h_min = 2.3, room_h_max = 2.8;
    double wall_clearance = 0.35;   ///< object/camera distance to walls
    double object_clearance = 0.25; ///< xy gap between object footprints
};

// ---------------------------------------------------------------------------
// Analytic ray casting. Directions are scaled so the parameter t equals the
// camera-space z of the point, making depths exact by construction.

struct RayHit {
    double t = std::numeric_limits<double>::infinity();
    int object_index = -1; ///< index into scene.objects, -1 for room surfaces
    int structural = 0;    ///< floor/wall/ceiling label when object_index < 0
    Vec3 normal = Vec3::UnitZ();
};

namespace detail {

constexpr double kRayEps = 1e-9;

inline bool slab(double o, double d, double lo, double hi, double& t0, double& t1) {
    if (std::abs(d) < 1e-300) return o >= lo && o <= hi; // parallel: no constraint update
    double a = (lo - o) / d, b = (hi - o) / d;
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
    return true;
}

inline bool ray_box_interval(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi,
                             double& t0, double& t1) {
    t0 = -std::numeric_limits<double>::infinity();
    t1 = std::numeric_limits<double>::infinity();
    for (int ax = 0; ax < 3; ++ax)
        if (!slab(o[ax], d[ax], lo[ax], hi[ax], t0, t1)) return false;
    return t0 <= t1;
}

inline Vec3 box_face_normal(const Vec3& q, const Vec3& lo, const Vec3& hi) {
    double best = std::numeric_limits<double>::infinity();
    Vec3 n = Vec3::UnitZ();
    for (int ax = 0; ax < 3; ++ax) {
        if (std::abs(q[ax] - lo[ax]) < best) {
            best = std::abs(q[ax] - lo[ax]);
            n = Vec3::Zero();
            n[ax] = -1;
        }
        if (std::abs(q[ax] - hi[ax]) < best) {
            best = std::abs(q[ax] - hi[ax]);
            n = Vec3::Zero();
            n[ax] = 1;
        }
    }
    return n;
}

} // namespace detail

inline std::optional<std::pair<double, Vec3>> ray_box(const Vec3& o, const Vec3& d,
                                                      const Box& box) {
    double t0, t1;
    if (!detail::ray_box_interval(o, d, box.min(), box.max(), t0, t1)) return std::nullopt;
    if (t1 <= detail::kRayEps) return std::nullopt;
    const double t = t0 > detail::kRayEps ? t0 : t1;
    const Vec3 q = o + t * d;
    Vec3 n = detail::box_face_normal(q, box.min(), box.max());
    if (t0 <= detail::kRayEps) n = -n; // hit from inside
    return std::make_pair(t, n);
}

inline std::optional<std::pair<double, Vec3>> ray_cylinder(const Vec3& o, const Vec3& d,
                                                           const VerticalCylinder& cyl) {
    const double ox = o.x() - cyl.center.x(), oy = o.y() - cyl.center.y();
    double best = std::numeric_limits<double>::infinity();
    Vec3 best_n = Vec3::UnitZ();

    const double a = d.x() * d.x() + d.y() * d.y();
    if (a > 1e-300) {
        const double b = 2.0 * (ox * d.x() + oy * d.y());
        const double c = ox * ox + oy * oy - cyl.radius * cyl.radius;
        const double disc = b * b - 4 * a * c;
        if (disc >= 0) {
            const double sq = std::sqrt(disc);
            for (const double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
                if (t <= detail::kRayEps || t >= best) continue;
                const double z = o.z() + t * d.z();
                if (z < cyl.z_min || z > cyl.z_max) continue;
                best = t;
                const Vec3 q = o + t * d;
                Vec3 n(q.x() - cyl.center.x(), q.y() - cyl.center.y(), 0.0);
                best_n = n.norm() > 0 ? Vec3(n.normalized()) : Vec3::UnitX();
            }
        }
    }
    if (std::abs(d.z()) > 1e-300) {
        for (const auto& [cap_z, nz] : {std::pair{cyl.z_min, -1.0}, std::pair{cyl.z_max, 1.0}}) {
            const double t = (cap_z - o.z()) / d.z();
            if (t <= detail::kRayEps || t >= best) continue;
            const double x = ox + t * d.x(), y = oy + t * d.y();
            if (x * x + y * y > cyl.radius * cyl.radius) continue;
            best = t;
            best_n = Vec3(0, 0, nz);
        }
    }
    if (!std::isfinite(best)) return std::nullopt;
    return std::make_pair(best, best_n);
}

/// Exit of a ray starting inside the room (union of boxes). Returns the exit
/// parameter plus the structural label and inward normal of the exit face.
inline bool ray_room_exit(const SynthRoom& room, const Vec3& o, const Vec3& d, double& t_exit,
                          int& structural, Vec3& normal) {
    struct Interval {
        double a, b;
        std::size_t rect;
    };
    std::vector<Interval> ivals;
    for (std::size_t r = 0; r < room.rects.size(); ++r) {
        const Vec3 lo(room.rects[r].first.x(), room.rects[r].first.y(), 0.0);
        const Vec3 hi(room.rects[r].second.x(), room.rects[r].second.y(), room.height);
        double t0, t1;
        if (detail::ray_box_interval(o, d, lo, hi, t0, t1)) ivals.push_back({t0, t1, r});
    }
    // Grow the covered interval from t=0 until no rectangle extends it.
    double e = 0.0;
    std::size_t exit_rect = room.rects.size();
    bool grew = true;
    bool started = false;
    while (grew) {
        grew = false;
        for (const auto& iv : ivals) {
            if (iv.a <= e + 1e-9 && iv.b > e) {
                e = iv.b;
                exit_rect = iv.rect;
                grew = true;
                started = true;
            }
        }
    }
    if (!started || exit_rect >= room.rects.size()) return false;

    t_exit = e;
    const Vec3 q = o + e * d;
    const auto& [lo2, hi2] = room.rects[exit_rect];
    const Vec3 lo(lo2.x(), lo2.y(), 0.0), hi(hi2.x(), hi2.y(), room.height);
    const Vec3 outward = detail::box_face_normal(q, lo, hi);
    normal = -outward; // room surfaces face inward
    if (outward.z() < -0.5) structural = kFloorLabel;
    else if (outward.z() > 0.5) structural = kCeilingLabel;
    else structural = kWallLabel;
    return true;
}

/// Closest surface along the ray: objects first, room shell as backstop.
inline RayHit first_hit(const SynthScene& scene, const Vec3& origin, const Vec3& dir) {
    RayHit hit;
    double t_room;
    int structural;
    Vec3 n;
    if (ray_room_exit(scene.room, origin, dir, t_room, structural, n)) {
        hit.t = t_room;
        hit.object_index = -1;
        hit.structural = structural;
        hit.normal = n;
    }
    for (std::size_t k = 0; k < scene.objects.size(); ++k) {
        const SceneObject& obj = scene.objects[k];
        std::optional<std::pair<double, Vec3>> h;
        if (obj.kind == PrimitiveKind::Box) h = ray_box(origin, dir, obj.box);
        else h = ray_cylinder(origin, dir, obj.cylinder);
        if (h && h->first < hit.t) {
            hit.t = h->first;
            hit.object_index = static_cast<int>(k);
            hit.structural = 0;
            hit.normal = h->second;
        }
    }
    return hit;
}

// ---------------------------------------------------------------------------
// Frame rendering

struct SynthFrame {
    DepthMap depth;    ///< camera-space z, true meters
    RasterU16 labels;  ///< category label ids
    ImageRgb8 image;   ///< flat-shaded palette colors
};

inline SynthFrame render_frame(const SynthScene& scene, const SynthCamera& cam) {
    const CameraIntrinsics& K = cam.intrinsics;
    SynthFrame f{DepthMap(K.width, K.height), RasterU16(K.width, K.height),
                 ImageRgb8(K.width, K.height)};
    const Vec3 origin = cam.pose.center();
    const Mat3 Rt = cam.pose.R.transpose();
    const Vec3 light = Vec3(0.4, 0.25, 0.88).normalized();

    for (int j = 0; j < K.height; ++j) {
        for (int i = 0; i < K.width; ++i) {
            const Vec3 dir_cam((i - K.cx) / K.fx, (j - K.cy) / K.fy, 1.0);
            const RayHit hit = first_hit(scene, origin, Rt * dir_cam);
            if (!std::isfinite(hit.t)) continue; // outside the room shell: invalid
            f.depth.set(i, j, hit.t);
            int label = hit.structural;
            if (hit.object_index >= 0)
                label = category_labels().at(scene.objects[hit.object_index].category);
            f.labels.set(i, j, static_cast<std::uint16_t>(label));
            std::uint8_t r, g, b;
            palette_color(label, r, g, b);
            const double shade = 0.65 + 0.35 * std::abs(hit.normal.dot(light));
            f.image.set(i, j, static_cast<std::uint8_t>(r * shade),
                        static_cast<std::uint8_t>(g * shade),
                        static_cast<std::uint8_t>(b * shade));
        }
    }
    return f;
}

inline std::vector<SynthFrame> render_scene(const SynthScene& scene, int threads = 1) {
    std::vector<SynthFrame> frames(scene.cameras.size());
    if (threads > 1 && scene.cameras.size() > 1) {
        std::vector<std::future<SynthFrame>> futs;
        futs.reserve(scene.cameras.size());
        for (const auto& cam : scene.cameras)
            futs.push_back(std::async(std::launch::async,
                                      [&scene, &cam] { return render_frame(scene, cam); }));
        for (std::size_t i = 0; i < futs.size(); ++i) frames[i] = futs[i].get();
    } else {
        for (std::size_t i = 0; i < scene.cameras.size(); ++i)
            frames[i] = render_frame(scene, scene.cameras[i]);
    }
    return frames;
}

// ---------------------------------------------------------------------------
// Visibility oracle

enum class Visibility { Visible, Occluded, OutOfView };

/// Exact-ray visibility of a 3D point. `object_index` (when >= 0) names the
/// scene object the point belongs to, so hitting that object's own surface
/// counts as visible. `surface_depth` (when given) receives the camera-space
/// depth of the first surface along the exact ray.
inline Visibility visibility_oracle(const SynthScene& scene, const Vec3& point,
                                    int object_index, const SynthCamera& cam,
                                    double* surface_depth = nullptr) {
    const Vec3 x_cam = cam.pose.R * point + cam.pose.t;
    if (x_cam.z() <= kMinProjectionDepth) return Visibility::OutOfView;
    const double u = cam.intrinsics.fx * x_cam.x() / x_cam.z() + cam.intrinsics.cx;
    const double v = cam.intrinsics.fy * x_cam.y() / x_cam.z() + cam.intrinsics.cy;
    const long pi = std::lround(u), pj = std::lround(v);
    if (pi < 0 || pj < 0 || pi >= cam.intrinsics.width || pj >= cam.intrinsics.height)
        return Visibility::OutOfView;

    const Vec3 origin = cam.pose.center();
    const Vec3 dir = (point - origin) / x_cam.z(); // parameter t = camera z
    const RayHit hit = first_hit(scene, origin, dir);
    if (surface_depth) *surface_depth = hit.t;
    if (hit.object_index >= 0 && hit.object_index == object_index) return Visibility::Visible;
    if (hit.t >= x_cam.z() - 1e-9) return Visibility::Visible;
    return Visibility::Occluded;
}

// ---------------------------------------------------------------------------
// Scene generation

namespace detail {

struct FootprintXy {
    Vec2 lo, hi;
};

inline FootprintXy footprint(const SceneObject& obj) {
    if (obj.kind == PrimitiveKind::Box)
        return {{obj.box.min().x(), obj.box.min().y()}, {obj.box.max().x(), obj.box.max().y()}};
    return {{obj.cylinder.center.x() - obj.cylinder.radius,
             obj.cylinder.center.y() - obj.cylinder.radius},
            {obj.cylinder.center.x() + obj.cylinder.radius,
             obj.cylinder.center.y() + obj.cylinder.radius}};
}

inline bool footprints_clear(const FootprintXy& a, const FootprintXy& b, double gap) {
    return a.hi.x() + gap <= b.lo.x() || b.hi.x() + gap <= a.lo.x() ||
           a.hi.y() + gap <= b.lo.y() || b.hi.y() + gap <= a.lo.y();
}

/// Box sizes (sx, sy, sz) per category; exact tabletop heights for the
/// categories used as scale references elsewhere.
inline Vec3 sample_box_size(Rng& rng, const std::string& cat, double room_h) {
    auto u = [&rng](double lo, double hi) { return rng.uniform(lo, hi); };
    if (cat == "crate") return {u(0.4, 0.8), u(0.4, 0.8), u(0.4, 0.8)};
    if (cat == "cabinet") return {u(0.6, 1.2), u(0.4, 0.6), u(1.2, std::min(2.0, room_h - 0.2))};
    if (cat == "sofa") return {u(1.6, 2.2), u(0.8, 1.0), u(0.7, 0.9)};
    if (cat == "chair") return {u(0.45, 0.55), u(0.45, 0.55), u(0.8, 1.0)};
    if (cat == "bed") return {u(1.4, 2.0), u(1.9, 2.1), u(0.5, 0.6)};
    if (cat == "desk") return {u(1.0, 1.6), u(0.6, 0.8), 0.75};
    if (cat == "countertop") return {u(1.2, 2.4), u(0.6, 0.65), 0.9};
    return {u(0.4, 1.0), u(0.4, 1.0), u(0.4, 1.0)};
}

inline std::pair<double, double> sample_cylinder_rh(Rng& rng, const std::string& cat,
                                                    double room_h) {
    auto u = [&rng](double lo, double hi) { return rng.uniform(lo, hi); };
    if (cat == "round_table") return {u(0.35, 0.6), u(0.7, 0.76)};
    if (cat == "column") return {u(0.12, 0.2), room_h};
    if (cat == "trash_bin") return {u(0.12, 0.2), u(0.3, 0.5)};
    if (cat == "stool") return {u(0.15, 0.22), u(0.45, 0.55)};
    return {u(0.15, 0.4), u(0.4, 0.9)};
}

inline std::vector<std::string> pick_distinct(Rng& rng, std::vector<std::string> pool,
                                              std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = rng.uniform_index(pool.size());
        out.push_back(pool[idx]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    return out;
}

inline CameraPose look_at_pose(const Vec3& eye, const Vec3& target) {
    Vec3 f = (target - eye).normalized();
    if (std::abs(f.z()) > 0.999) throw std::invalid_argument("look_at_pose: degenerate forward");
    const Vec3 right = f.cross(Vec3::UnitZ()).normalized();
    const Vec3 down = f.cross(right);
    Mat3 R;
    R.row(0) = right;
    R.row(1) = down;
    R.row(2) = f;
    return CameraPose{R, -R * eye};
}

} // namespace detail

/// Deterministic procedural scene: rectangular or L-shaped room, distinct
/// object categories, cameras ringed above eye height looking inward and
/// down, every object center visible from at least one camera.
inline SynthScene generate_scene(std::uint64_t seed, const SynthParams& params = {}) {
    if (params.n_boxes < 0 || params.n_cylinders < 0 || params.n_cameras < 1)
        throw ConfigError("generate_scene: counts out of range");
    if (static_cast<std::size_t>(params.n_boxes) > box_categories().size() ||
        static_cast<std::size_t>(params.n_cylinders) > cylinder_categories().size())
        throw ConfigError("generate_scene: more objects than distinct categories");

    Rng rng(seed);
    int budget = 10000; // total rejection-sampling tries across all phases

    for (;;) {
        SynthScene scene;
        scene.seed = seed;

        SynthRoom& room = scene.room;
        const double w = rng.uniform(params.room_w_min, params.room_w_max);
        const double d = rng.uniform(params.room_d_min, params.room_d_max);
        room.height = rng.uniform(params.room_h_min, params.room_h_max);
        if (rng.uniform() < params.l_shape_prob) {
            const double cw = rng.uniform(0.3, 0.45) * w;
            const double cd = rng.uniform(0.3, 0.45) * d;
            room.rects = {{{0, 0}, {w, d - cd}}, {{0, 0}, {w - cw, d}}};
            room.polygon = {{0, 0}, {w, 0}, {w, d - cd}, {w - cw, d - cd}, {w - cw, d}, {0, d}};
            room.area = w * d - cw * cd;
        } else {
            room.rects = {{{0, 0}, {w, d}}};
            room.polygon = {{0, 0}, {w, 0}, {w, d}, {0, d}};
            room.area = w * d;
        }

        scene.labels[kFloorLabel] = "floor";
        scene.labels[kWallLabel] = "wall";
        scene.labels[kCeilingLabel] = "ceiling";

        std::vector<std::string> cats =
            detail::pick_distinct(rng, box_categories(), static_cast<std::size_t>(params.n_boxes));
        for (auto& c : detail::pick_distinct(rng, cylinder_categories(),
                                             static_cast<std::size_t>(params.n_cylinders)))
            cats.push_back(std::move(c));

        bool layout_ok = true;
        for (const std::string& cat : cats) {
            bool placed = false;
            for (int attempt = 0; attempt < 300 && !placed; ++attempt) {
                if (--budget <= 0)
                    throw ConfigError("generate_scene: infeasible params (rejection budget "
                                      "exhausted)");
                SceneObject obj;
                obj.id = static_cast<int>(scene.objects.size()) + 1;
                obj.category = cat;
                const Vec2 c{rng.uniform(0.0, w), rng.uniform(0.0, d)};
                const bool is_cyl =
                    std::find(cylinder_categories().begin(), cylinder_categories().end(), cat) !=
                    cylinder_categories().end();
                if (is_cyl) {
                    const auto [radius, height] = detail::sample_cylinder_rh(rng, cat, room.height);
                    obj.kind = PrimitiveKind::Cylinder;
                    obj.cylinder = {c, radius, 0.0, height};
                    obj.box = {{c.x(), c.y(), height / 2}, {2 * radius, 2 * radius, height}};
                } else {
                    const Vec3 size = detail::sample_box_size(rng, cat, room.height);
                    obj.kind = PrimitiveKind::Box;
                    obj.box = {{c.x(), c.y(), size.z() / 2}, size};
                }
                const auto fp = detail::footprint(obj);
                if (!room.contains_rect_xy(fp.lo, fp.hi, params.wall_clearance)) continue;
                bool clear = true;
                for (const auto& other : scene.objects)
                    if (!detail::footprints_clear(fp, detail::footprint(other),
                                                  params.object_clearance)) {
                        clear = false;
                        break;
                    }
                if (!clear) continue;
                scene.objects.push_back(obj);
                scene.labels[category_labels().at(cat)] = cat;
                placed = true;
            }
            if (!placed) {
                layout_ok = false;
                break;
            }
        }
        if (!layout_ok) continue;

        // Cameras: ring around the main rectangle's center, slightly above eye
        // height and aimed below the horizontal so floors and object tops get
        // steep, dense coverage instead of grazing rays. Each camera sits at a
        // random fraction of the distance to the wall along its own bearing,
        // so the ring adapts to the room shape.
        const Vec2 lo0 = room.rects[0].first, hi0 = room.rects[0].second;
        const Vec2 anchor = 0.5 * (lo0 + hi0);

        bool cameras_ok = false;
        for (int round = 0; round < 25 && !cameras_ok; ++round) {
            scene.cameras.clear();
            bool all_placed = true;
            for (int k = 0; k < params.n_cameras && all_placed; ++k) {
                bool placed = false;
                for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
                    if (--budget <= 0)
                        throw ConfigError("generate_scene: infeasible params (rejection budget "
                                          "exhausted)");
                    const double angle =
                        (k + rng.uniform(-0.3, 0.3)) * 2.0 * 3.14159265358979323846 /
                        params.n_cameras;
                    const Vec2 dir{std::cos(angle), std::sin(angle)};
                    double reach = 0.0;
                    for (double t = 0.1; t < 20.0; t += 0.1) {
                        if (!room.contains_xy(anchor + t * dir, params.wall_clearance)) break;
                        reach = t;
                    }
                    if (reach < 0.3) continue;
                    const Vec2 p2 = anchor + reach * rng.uniform(0.55, 0.95) * dir;
                    bool clear = true;
                    for (const auto& obj : scene.objects) {
                        const auto fp = detail::footprint(obj);
                        if (p2.x() > fp.lo.x() - 0.25 && p2.x() < fp.hi.x() + 0.25 &&
                            p2.y() > fp.lo.y() - 0.25 && p2.y() < fp.hi.y() + 0.25) {
                            clear = false;
                            break;
                        }
                    }
                    if (!clear) continue;
                    // Every third camera looks up so ceiling and wall tops stay
                    // observed; the rest look down for floor and object tops.
                    const bool upward = k % 3 == 2;
                    const Vec3 eye(p2.x(), p2.y(), rng.uniform(1.7, 2.1));
                    const Vec3 target(anchor.x() + rng.uniform(-0.5, 0.5),
                                      anchor.y() + rng.uniform(-0.5, 0.5),
                                      upward ? rng.uniform(1.9, 2.3) : rng.uniform(0.5, 0.9));
                    if ((target - eye).head<2>().norm() < 0.3) continue;
                    SynthCamera cam;
                    cam.intrinsics = CameraIntrinsics{params.focal, params.focal,
                                                      params.image_width / 2.0,
                                                      params.image_height / 2.0,
                                                      params.image_width, params.image_height};
                    cam.pose = detail::look_at_pose(eye, target);
                    scene.cameras.push_back(cam);
                    placed = true;
                }
                if (!placed) all_placed = false;
            }
            if (!all_placed) continue;

            cameras_ok = true;
            for (std::size_t oi = 0; oi < scene.objects.size() && cameras_ok; ++oi) {
                bool seen = false;
                for (const auto& cam : scene.cameras)
                    if (visibility_oracle(scene, scene.objects[oi].center(),
                                          static_cast<int>(oi), cam) == Visibility::Visible) {
                        seen = true;
                        break;
                    }
                if (!seen) cameras_ok = false;
            }
        }
        if (!cameras_ok) continue;
        return scene;
    }
}

// ---------------------------------------------------------------------------
// Export: simulated reconstruction outputs plus a ground-truth sidecar.

struct ExportOptions {
    double recon_scale = 1.0;  ///< true depths divided by this before writing
    double depth_noise = 0.0;  ///< Gaussian sigma, true meters, applied pre-scale
    double world_yaw_deg = 0.0;  ///< rotation of the reconstruction frame about z
    double world_tilt_deg = 0.0; ///< additional rotation about x
    bool png_depth = false;      ///< 16-bit millimeter PNG instead of float raw
    std::uint64_t noise_seed = 1;
};

/// True frame <-> reconstruction frame: p_recon = R_world * p_true / scale.
struct ExportTransform {
    Mat3 world_rotation = Mat3::Identity();
    double scale = 1.0;
    Vec3 to_recon(const Vec3& p) const { return world_rotation * p / scale; }
    Vec3 to_true(const Vec3& q) const { return world_rotation.transpose() * q * scale; }
};

inline ExportTransform export_transform(const ExportOptions& opt) {
    const double deg = 3.14159265358979323846 / 180.0;
    ExportTransform t;
    t.world_rotation = rotation_z(opt.world_yaw_deg * deg) *
                       axis_angle(Vec3::UnitX(), opt.world_tilt_deg * deg);
    t.scale = opt.recon_scale;
    return t;
}

struct ReconFrames {
    std::vector<DepthMap> depths; ///< recon units (true / scale), noise applied
    std::vector<RasterU16> labels;
    std::vector<ImageRgb8> images;
    std::vector<CameraIntrinsics> intrinsics;
    std::vector<CameraPose> poses; ///< recon-frame world-to-camera
    ExportTransform transform;
};

/// Renders every camera and rewrites depths/poses as a reconstruction with
/// unknown scale and orientation would report them.
inline ReconFrames make_recon_frames(const SynthScene& scene, const ExportOptions& opt,
                                     int threads = 1) {
    if (!(opt.recon_scale > 0)) throw std::invalid_argument("recon_scale must be > 0");
    if (opt.depth_noise < 0) throw std::invalid_argument("depth_noise must be >= 0");

    ReconFrames out;
    out.transform = export_transform(opt);
    std::vector<SynthFrame> frames = render_scene(scene, threads);
    for (std::size_t fi = 0; fi < frames.size(); ++fi) {
        SynthFrame& f = frames[fi];
        Rng noise(opt.noise_seed * 0x9e3779b97f4a7c15ULL + fi + 1);
        DepthMap dm(f.depth.width, f.depth.height);
        for (int j = 0; j < f.depth.height; ++j)
            for (int i = 0; i < f.depth.width; ++i) {
                if (!f.depth.is_valid(i, j)) continue;
                double z = f.depth.at(i, j);
                if (opt.depth_noise > 0) z = std::max(1e-4, z + noise.gaussian(0, opt.depth_noise));
                dm.set(i, j, z / opt.recon_scale);
            }
        out.depths.push_back(std::move(dm));
        out.labels.push_back(std::move(f.labels));
        out.images.push_back(std::move(f.image));
        out.intrinsics.push_back(scene.cameras[fi].intrinsics);
        const CameraPose& tp = scene.cameras[fi].pose;
        out.poses.push_back(CameraPose{tp.R * out.transform.world_rotation.transpose(),
                                       tp.t / opt.recon_scale});
    }
    return out;
}

inline nlohmann::json scene_truth_json(const SynthScene& scene, const ExportOptions& opt) {
    nlohmann::json j;
    j["seed"] = scene.seed;
    j["room"]["height"] = scene.room.height;
    j["room"]["area"] = scene.room.area;
    for (const auto& [lo, hi] : scene.room.rects)
        j["room"]["rects"].push_back({lo.x(), lo.y(), hi.x(), hi.y()});
    for (const auto& v : scene.room.polygon) j["room"]["polygon"].push_back({v.x(), v.y()});
    j["room"]["rects"] = j["room"].value("rects", nlohmann::json::array());
    for (const auto& obj : scene.objects) {
        nlohmann::json o;
        o["id"] = obj.id;
        o["category"] = obj.category;
        if (obj.kind == PrimitiveKind::Box) {
            o["kind"] = "box";
            o["center"] = {obj.box.center.x(), obj.box.center.y(), obj.box.center.z()};
            o["size"] = {obj.box.size.x(), obj.box.size.y(), obj.box.size.z()};
        } else {
            o["kind"] = "cylinder";
            o["center"] = {obj.cylinder.center.x(), obj.cylinder.center.y()};
            o["radius"] = obj.cylinder.radius;
            o["z"] = {obj.cylinder.z_min, obj.cylinder.z_max};
        }
        j["objects"].push_back(o);
    }
    j["objects"] = j.value("objects", nlohmann::json::array());
    for (const auto& cam : scene.cameras) {
        nlohmann::json c;
        c["fx"] = cam.intrinsics.fx;
        c["fy"] = cam.intrinsics.fy;
        c["cx"] = cam.intrinsics.cx;
        c["cy"] = cam.intrinsics.cy;
        c["width"] = cam.intrinsics.width;
        c["height"] = cam.intrinsics.height;
        for (int r = 0; r < 3; ++r)
            for (int col = 0; col < 3; ++col) c["R"].push_back(cam.pose.R(r, col));
        c["t"] = {cam.pose.t.x(), cam.pose.t.y(), cam.pose.t.z()};
        j["cameras"].push_back(c);
    }
    for (const auto& [id, cat] : scene.labels) j["labels"][std::to_string(id)] = cat;
    j["export"]["recon_scale"] = opt.recon_scale;
    j["export"]["depth_noise"] = opt.depth_noise;
    j["export"]["world_yaw_deg"] = opt.world_yaw_deg;
    j["export"]["world_tilt_deg"] = opt.world_tilt_deg;
    return j;
}

inline SynthScene scene_from_truth_json(const nlohmann::json& j, ExportOptions* opt = nullptr) {
    SynthScene scene;
    scene.seed = j.at("seed").get<std::uint64_t>();
    scene.room.height = j.at("room").at("height").get<double>();
    scene.room.area = j.at("room").at("area").get<double>();
    for (const auto& r : j.at("room").at("rects"))
        scene.room.rects.push_back({{r[0].get<double>(), r[1].get<double>()},
                                    {r[2].get<double>(), r[3].get<double>()}});
    for (const auto& v : j.at("room").at("polygon"))
        scene.room.polygon.push_back({v[0].get<double>(), v[1].get<double>()});
    for (const auto& o : j.at("objects")) {
        SceneObject obj;
        obj.id = o.at("id").get<int>();
        obj.category = o.at("category").get<std::string>();
        if (o.at("kind") == "box") {
            obj.kind = PrimitiveKind::Box;
            obj.box.center = {o["center"][0].get<double>(), o["center"][1].get<double>(),
                              o["center"][2].get<double>()};
            obj.box.size = {o["size"][0].get<double>(), o["size"][1].get<double>(),
                            o["size"][2].get<double>()};
        } else {
            obj.kind = PrimitiveKind::Cylinder;
            obj.cylinder.center = {o["center"][0].get<double>(), o["center"][1].get<double>()};
            obj.cylinder.radius = o.at("radius").get<double>();
            obj.cylinder.z_min = o["z"][0].get<double>();
            obj.cylinder.z_max = o["z"][1].get<double>();
            obj.box = {{obj.cylinder.center.x(), obj.cylinder.center.y(),
                        0.5 * (obj.cylinder.z_min + obj.cylinder.z_max)},
                       {2 * obj.cylinder.radius, 2 * obj.cylinder.radius,
                        obj.cylinder.z_max - obj.cylinder.z_min}};
        }
        scene.objects.push_back(obj);
    }
    for (const auto& c : j.at("cameras")) {
        SynthCamera cam;
        cam.intrinsics = CameraIntrinsics{c.at("fx").get<double>(), c.at("fy").get<double>(),
                                          c.at("cx").get<double>(), c.at("cy").get<double>(),
                                          c.at("width").get<int>(), c.at("height").get<int>()};
        Mat3 R;
        for (int r = 0; r < 3; ++r)
            for (int col = 0; col < 3; ++col) R(r, col) = c.at("R")[r * 3 + col].get<double>();
        cam.pose = CameraPose{R, Vec3(c.at("t")[0].get<double>(), c.at("t")[1].get<double>(),
                                      c.at("t")[2].get<double>())};
        scene.cameras.push_back(cam);
    }
    for (const auto& [key, cat] : j.at("labels").items())
        scene.labels[std::stoi(key)] = cat.get<std::string>();
    if (opt && j.contains("export")) {
        opt->recon_scale = j["export"].value("recon_scale", 1.0);
        opt->depth_noise = j["export"].value("depth_noise", 0.0);
        opt->world_yaw_deg = j["export"].value("world_yaw_deg", 0.0);
        opt->world_tilt_deg = j["export"].value("world_tilt_deg", 0.0);
    }
    return scene;
}

/// Writes images, depth and label rasters, the scene manifest, and the
/// ground-truth sidecar (`scene_truth.json`). Returns the manifest path.
inline fs::path export_manifest(const SynthScene& scene, const fs::path& dir,
                                const ExportOptions& opt = {}, int threads = 1) {
    fs::create_directories(dir);
    const ReconFrames rf = make_recon_frames(scene, opt, threads);

    SceneManifest m;
    m.scene_id = "synth-" + std::to_string(scene.seed);
    m.depth_scale = opt.png_depth ? 0.001 : 1.0;
    for (const auto& [id, cat] : scene.labels) m.labels[id] = cat;
    m.reference_heights["ceiling"] = scene.room.height;
    m.base_dir = dir;

    char name[64];
    for (std::size_t fi = 0; fi < rf.depths.size(); ++fi) {
        Frame frame;
        std::snprintf(name, sizeof(name), "image_%03zu.png", fi);
        frame.image_path = name;
        write_png_rgb8(dir / name, rf.images[fi]);
        std::snprintf(name, sizeof(name), opt.png_depth ? "depth_%03zu.png" : "depth_%03zu.fraw",
                      fi);
        frame.depth_path = name;
        encode_depth(dir / name, rf.depths[fi], m.depth_scale);
        std::snprintf(name, sizeof(name), "labels_%03zu.png", fi);
        frame.label_path = name;
        encode_labels(dir / name, rf.labels[fi]);
        frame.intrinsics = rf.intrinsics[fi];
        frame.pose = rf.poses[fi];
        m.frames.push_back(frame);
    }

    const fs::path manifest_path = dir / "manifest.json";
    save_manifest(m, manifest_path);
    std::ofstream truth(dir / "scene_truth.json");
    truth << scene_truth_json(scene, opt).dump(2) << "\n";
    return manifest_path;
}

inline SynthScene load_scene_truth(const fs::path& path, ExportOptions* opt = nullptr) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read scene truth: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("scene truth parse error: " + std::string(e.what()));
    }
    return scene_from_truth_json(j, opt);
}

} // namespace gr3d::synth
