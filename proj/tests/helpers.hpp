#pragma once

#include <unistd.h>

#include <filesystem>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "gr3d/geometry.hpp"
#include "gr3d/rng.hpp"
#include "gr3d/textref.hpp"

namespace testutil {

/// Scratch directory removed on scope exit.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("gr3d_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline gr3d::Mat3 random_rotation(gr3d::Rng& rng) {
    gr3d::Vec3 axis(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    while (axis.norm() < 1e-3)
        axis = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    return gr3d::axis_angle(axis.normalized(), rng.uniform(0, 2 * 3.14159265358979323846));
}

inline gr3d::CameraPose random_pose(gr3d::Rng& rng) {
    return {random_rotation(rng),
            gr3d::Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5))};
}

inline gr3d::CameraIntrinsics random_intrinsics(gr3d::Rng& rng) {
    const int w = 64 + static_cast<int>(rng.uniform_index(1936));
    const int h = 64 + static_cast<int>(rng.uniform_index(1136));
    return {rng.uniform(50, 1500), rng.uniform(50, 1500),
            rng.uniform(0.25, 0.75) * w, rng.uniform(0.25, 0.75) * h, w, h};
}

/// Axis alignment leaves the scene frame rotated by an unknown multiple of
/// 90 degrees about z. Pairs extracted objects with ground truth by category,
/// tries all four quarter turns, and reports the errors of the best one.
struct TruthMatch {
    bool matched = false;        ///< categories paired one-to-one
    int quarter_turns = 0;
    double max_center_err = std::numeric_limits<double>::infinity();
    double max_side_err = std::numeric_limits<double>::infinity();   ///< box sides, meters
    double max_radius_rel = std::numeric_limits<double>::infinity(); ///< cylinder radii
};

inline TruthMatch match_to_truth(const std::vector<gr3d::SceneObject>& truth,
                                 const std::vector<gr3d::SceneObject>& extracted) {
    using gr3d::SceneObject;
    using gr3d::Vec3;
    TruthMatch best;
    if (truth.size() != extracted.size()) return best;

    std::map<std::string, const SceneObject*> by_category;
    for (const auto& obj : extracted) {
        if (by_category.count(obj.category)) return best; // duplicate category
        by_category[obj.category] = &obj;
    }

    double best_total = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 4; ++k) {
        const gr3d::Mat3 R = gr3d::rotation_z(k * 3.14159265358979323846 / 2.0);
        TruthMatch m;
        m.matched = true;
        m.quarter_turns = k;
        m.max_center_err = m.max_side_err = m.max_radius_rel = 0.0;
        double total = 0.0;
        for (const auto& t : truth) {
            const auto it = by_category.find(t.category);
            if (it == by_category.end()) {
                m.matched = false;
                break;
            }
            const SceneObject& e = *it->second;
            const double center_err = (Vec3(R * t.center()) - e.center()).norm();
            total += center_err;
            m.max_center_err = std::max(m.max_center_err, center_err);
            if (t.kind == gr3d::PrimitiveKind::Box && e.kind == gr3d::PrimitiveKind::Box) {
                const bool swap = k % 2 == 1;
                const Vec3 ts{swap ? t.box.size.y() : t.box.size.x(),
                              swap ? t.box.size.x() : t.box.size.y(), t.box.size.z()};
                for (int d = 0; d < 3; ++d)
                    m.max_side_err =
                        std::max(m.max_side_err, std::abs(ts[d] - e.box.size[d]));
            } else if (t.kind == gr3d::PrimitiveKind::Cylinder &&
                       e.kind == gr3d::PrimitiveKind::Cylinder) {
                m.max_radius_rel =
                    std::max(m.max_radius_rel, std::abs(e.cylinder.radius - t.cylinder.radius) /
                                                   t.cylinder.radius);
            } else {
                m.matched = false;
                break;
            }
        }
        if (m.matched && total < best_total) {
            best_total = total;
            best = m;
        }
    }
    return best;
}

/// Fixed inputs for the prompt golden files: one box, one cylinder, a plain
/// rectangular room, two cameras, one question.
struct PromptFixture {
    std::vector<gr3d::SceneObject> objects;
    gr3d::RoomBoundary room;
    std::vector<gr3d::CameraRef> cameras;
    std::string question;
};

inline PromptFixture prompt_fixture() {
    PromptFixture f;
    gr3d::SceneObject box;
    box.id = 1;
    box.kind = gr3d::PrimitiveKind::Box;
    box.box.center = {1.25, -0.5, 0.4};
    box.box.size = {0.8, 0.6, 0.8};
    gr3d::SceneObject cyl;
    cyl.id = 2;
    cyl.kind = gr3d::PrimitiveKind::Cylinder;
    cyl.cylinder.center = {3.0, 2.0};
    cyl.cylinder.radius = 0.35;
    cyl.cylinder.z_min = 0.0;
    cyl.cylinder.z_max = 1.1;
    f.objects = {box, cyl};

    f.room.polygon = {{0, 0}, {5, 0}, {5, 3.7}, {0, 3.7}};
    f.room.area = 18.5;
    f.room.height = 2.5;

    gr3d::CameraRef a;
    a.intrinsics = gr3d::CameraIntrinsics{160, 160, 128, 96, 256, 192};
    a.pose = gr3d::CameraPose{gr3d::Mat3::Identity(), gr3d::Vec3{0.1, -0.2, 1.5}};
    gr3d::CameraRef b;
    b.intrinsics = gr3d::CameraIntrinsics{200, 210, 130, 98, 260, 196};
    b.pose = gr3d::CameraPose{gr3d::rotation_z(3.14159265358979323846 / 2.0),
                              gr3d::Vec3{-1.0, 0.25, 1.4}};
    f.cameras = {a, b};
    f.question = "How far apart are objects 1 and 2?";
    return f;
}

inline std::string prompt_for_mode(gr3d::PromptMode mode) {
    const PromptFixture f = prompt_fixture();
    gr3d::PromptOptions opt;
    opt.mode = mode;
    opt.precision = 2;
    opt.question = f.question;
    opt.cameras = f.cameras;
    return gr3d::build_prompt(gr3d::serialize_refs(f.objects, opt.precision), f.room, opt);
}

} // namespace testutil
