#include <catch2/catch_amalgamated.hpp>

#include "gr3d/cloud.hpp"
#include "gr3d/manifest.hpp"
#include "gr3d/synth.hpp"
#include "helpers.hpp"

using namespace gr3d;
using namespace gr3d::synth;

namespace {

SynthScene manual_scene() {
    SynthScene s;
    s.room.rects = {{{0, 0}, {4, 5}}};
    s.room.height = 2.5;
    s.room.polygon = {{0, 0}, {4, 0}, {4, 5}, {0, 5}};
    s.room.area = 20.0;
    s.labels = {{1, "floor"}, {2, "wall"}, {3, "ceiling"}};
    SynthCamera cam;
    cam.intrinsics = CameraIntrinsics{100, 100, 64, 48, 128, 96};
    cam.pose = CameraPose{Mat3::Identity(), Vec3::Zero()};
    // identity pose: camera at origin corner looking +z, useless for a room;
    // tests construct their own cameras instead.
    return s;
}

bool on_room_surface(const SynthRoom& room, const Vec3& p, double tol) {
    // On the union boundary: inside (with tol) and near some face of a rect
    // that is not interior to another rect.
    if (std::abs(p.z()) < tol || std::abs(p.z() - room.height) < tol) {
        return room.contains_xy({p.x(), p.y()}, -tol);
    }
    if (p.z() < -tol || p.z() > room.height + tol) return false;
    for (const auto& [lo, hi] : room.rects) {
        const bool near_x = std::abs(p.x() - lo.x()) < tol || std::abs(p.x() - hi.x()) < tol;
        const bool near_y = std::abs(p.y() - lo.y()) < tol || std::abs(p.y() - hi.y()) < tol;
        const bool in_x = p.x() > lo.x() - tol && p.x() < hi.x() + tol;
        const bool in_y = p.y() > lo.y() - tol && p.y() < hi.y() + tol;
        if ((near_x && in_y) || (near_y && in_x)) {
            // must not be strictly inside the union
            if (!room.contains_xy({p.x(), p.y()}, tol)) return true;
        }
    }
    return false;
}

bool on_object_surface(const SceneObject& obj, const Vec3& p, double tol) {
    if (obj.kind == PrimitiveKind::Box) {
        const Vec3 lo = obj.box.min(), hi = obj.box.max();
        for (int ax = 0; ax < 3; ++ax) {
            if (p[ax] < lo[ax] - tol || p[ax] > hi[ax] + tol) return false;
        }
        for (int ax = 0; ax < 3; ++ax)
            if (std::abs(p[ax] - lo[ax]) < tol || std::abs(p[ax] - hi[ax]) < tol) return true;
        return false;
    }
    const double r = std::hypot(p.x() - obj.cylinder.center.x(), p.y() - obj.cylinder.center.y());
    if (p.z() < obj.cylinder.z_min - tol || p.z() > obj.cylinder.z_max + tol) return false;
    if (std::abs(r - obj.cylinder.radius) < tol) return true;
    const bool on_cap = std::abs(p.z() - obj.cylinder.z_min) < tol ||
                        std::abs(p.z() - obj.cylinder.z_max) < tol;
    return on_cap && r <= obj.cylinder.radius + tol;
}

} // namespace

TEST_CASE("ray_box hits faces with correct depth and misses cleanly") {
    const Box box{{0, 0, 1}, {2, 2, 2}}; // [-1,1]^2 x [0,2]
    SECTION("axis ray enters the front face") {
        const auto h = ray_box({-5, 0, 1}, {1, 0, 0}, box);
        REQUIRE(h.has_value());
        CHECK(h->first == Catch::Approx(4.0));
        CHECK((h->second - Vec3{-1, 0, 0}).norm() < 1e-12);
    }
    SECTION("ray pointing away misses") {
        CHECK_FALSE(ray_box({-5, 0, 1}, {-1, 0, 0}, box).has_value());
    }
    SECTION("ray offset beyond the slab misses") {
        CHECK_FALSE(ray_box({-5, 3, 1}, {1, 0, 0}, box).has_value());
    }
    SECTION("origin inside exits through the far face") {
        const auto h = ray_box({0, 0, 1}, {1, 0, 0}, box);
        REQUIRE(h.has_value());
        CHECK(h->first == Catch::Approx(1.0));
    }
}

TEST_CASE("ray_cylinder handles sides and caps") {
    const VerticalCylinder cyl{{1, 2}, 0.5, 0.0, 1.0};
    SECTION("side hit") {
        const auto h = ray_cylinder({-2, 2, 0.5}, {1, 0, 0}, cyl);
        REQUIRE(h.has_value());
        CHECK(h->first == Catch::Approx(2.5));
        CHECK((h->second - Vec3{-1, 0, 0}).norm() < 1e-9);
    }
    SECTION("cap hit from above") {
        const auto h = ray_cylinder({1, 2, 3}, {0, 0, -1}, cyl);
        REQUIRE(h.has_value());
        CHECK(h->first == Catch::Approx(2.0));
        CHECK((h->second - Vec3{0, 0, 1}).norm() < 1e-12);
    }
    SECTION("side miss outside the z range") {
        CHECK_FALSE(ray_cylinder({-2, 2, 1.5}, {1, 0, 0}, cyl).has_value());
    }
    SECTION("vertical ray outside the radius misses") {
        CHECK_FALSE(ray_cylinder({2, 2, 3}, {0, 0, -1}, cyl).has_value());
    }
}

TEST_CASE("room exit classifies faces and respects the L union") {
    SynthRoom room;
    room.rects = {{{0, 0}, {4, 3}}, {{0, 0}, {2, 5}}};
    room.height = 2.5;

    double t;
    int structural;
    Vec3 n;
    SECTION("wall straight ahead") {
        REQUIRE(ray_room_exit(room, {1, 1, 1.5}, {1, 0, 0}, t, structural, n));
        CHECK(t == Catch::Approx(3.0));
        CHECK(structural == kWallLabel);
        CHECK((n - Vec3{-1, 0, 0}).norm() < 1e-12);
    }
    SECTION("ray crossing the seam leaves through the far rectangle") {
        REQUIRE(ray_room_exit(room, {1, 1, 1.5}, {0, 1, 0}, t, structural, n));
        CHECK(t == Catch::Approx(4.0)); // exits second rect at y=5
        CHECK(structural == kWallLabel);
    }
    SECTION("floor and ceiling") {
        REQUIRE(ray_room_exit(room, {1, 1, 1.5}, {0, 0, -1}, t, structural, n));
        CHECK(structural == kFloorLabel);
        CHECK(t == Catch::Approx(1.5));
        REQUIRE(ray_room_exit(room, {1, 1, 1.5}, {0, 0, 1}, t, structural, n));
        CHECK(structural == kCeilingLabel);
        CHECK(t == Catch::Approx(1.0));
    }
}

TEST_CASE("rendered frame matches a straight-ahead wall distance") {
    SynthScene s = manual_scene();
    SynthCamera cam;
    cam.intrinsics = CameraIntrinsics{100, 100, 64, 48, 128, 96};
    cam.pose = synth::detail::look_at_pose({1.0, 2.5, 1.5}, {3.9, 2.5, 1.5});
    s.cameras = {cam};

    const SynthFrame f = render_frame(s, cam);
    // principal pixel looks straight +x at the wall x=4, 3 m away
    CHECK(f.depth.at(64, 48) == Catch::Approx(3.0).epsilon(1e-9));
    CHECK(f.labels.at(64, 48) == kWallLabel);

    // every pixel's unprojection lies on the room shell
    int checked = 0;
    for (int j = 0; j < 96; j += 7)
        for (int i = 0; i < 128; i += 7) {
            REQUIRE(f.depth.is_valid(i, j));
            const Vec3 p = unproject({double(i), double(j)}, f.depth.at(i, j), cam.pose,
                                     cam.intrinsics);
            CHECK(on_room_surface(s.room, p, 1e-6));
            ++checked;
        }
    CHECK(checked > 200);
}

TEST_CASE("rendered object pixels sit on that object's surface") {
    SynthScene s = manual_scene();
    SceneObject box;
    box.id = 1;
    box.category = "crate";
    box.kind = PrimitiveKind::Box;
    box.box = {{2.0, 2.5, 0.4}, {0.8, 0.8, 0.8}};
    s.objects = {box};
    s.labels[10] = "crate";

    SceneObject cyl;
    cyl.id = 2;
    cyl.category = "trash_bin";
    cyl.kind = PrimitiveKind::Cylinder;
    cyl.cylinder = {{3.0, 1.0}, 0.2, 0.0, 0.45};
    s.objects.push_back(cyl);
    s.labels[22] = "trash_bin";

    SynthCamera cam;
    cam.intrinsics = CameraIntrinsics{100, 100, 64, 48, 128, 96};
    cam.pose = synth::detail::look_at_pose({0.5, 3.8, 1.5}, {2.5, 1.8, 0.5});
    const SynthFrame f = render_frame(s, cam);

    int box_px = 0, cyl_px = 0;
    for (int j = 0; j < 96; ++j)
        for (int i = 0; i < 128; ++i) {
            const std::uint16_t label = f.labels.at(i, j);
            const Vec3 p = unproject({double(i), double(j)}, f.depth.at(i, j), cam.pose,
                                     cam.intrinsics);
            if (label == 10) {
                CHECK(on_object_surface(s.objects[0], p, 1e-6));
                ++box_px;
            } else if (label == 22) {
                CHECK(on_object_surface(s.objects[1], p, 1e-6));
                ++cyl_px;
            }
        }
    CHECK(box_px > 50);
    CHECK(cyl_px > 20);
}

TEST_CASE("generated scenes are deterministic and satisfy their invariants") {
    SynthParams params;
    params.n_boxes = 3;
    params.n_cylinders = 2;
    params.n_cameras = 5;
    const SynthScene a = generate_scene(42, params);
    const SynthScene b = generate_scene(42, params);
    CHECK(scene_truth_json(a, {}).dump() == scene_truth_json(b, {}).dump());
    const SynthScene c = generate_scene(43, params);
    CHECK(scene_truth_json(a, {}).dump() != scene_truth_json(c, {}).dump());

    REQUIRE(a.objects.size() == 5);
    REQUIRE(a.cameras.size() == 5);

    std::set<std::string> cats;
    for (const auto& obj : a.objects) cats.insert(obj.category);
    CHECK(cats.size() == a.objects.size()); // distinct categories

    for (std::size_t i = 0; i < a.objects.size(); ++i) {
        for (std::size_t k = i + 1; k < a.objects.size(); ++k) {
            const auto fa = synth::detail::footprint(a.objects[i]);
            const auto fb = synth::detail::footprint(a.objects[k]);
            CHECK(synth::detail::footprints_clear(fa, fb, 0.0));
        }
        bool visible = false;
        for (const auto& cam : a.cameras)
            if (visibility_oracle(a, a.objects[i].center(), static_cast<int>(i), cam) ==
                Visibility::Visible)
                visible = true;
        CHECK(visible);
    }
    for (const auto& cam : a.cameras) {
        CHECK(cam.pose.center().z() > 1.5);
        CHECK(cam.pose.center().z() < a.room.height);
        CHECK(a.room.contains_xy({cam.pose.center().x(), cam.pose.center().y()}));
    }
}

TEST_CASE("empty room is a valid scene") {
    SynthParams params;
    params.n_boxes = 0;
    params.n_cylinders = 0;
    params.n_cameras = 2;
    const SynthScene s = generate_scene(7, params);
    CHECK(s.objects.empty());
    CHECK(s.cameras.size() == 2);
}

TEST_CASE("infeasible generation requests fail loudly") {
    SynthParams params;
    params.n_boxes = 20;
    CHECK_THROWS_AS(generate_scene(0, params), ConfigError);

    SynthParams cramped;
    cramped.n_boxes = 2;
    cramped.wall_clearance = 10.0; // nothing can ever be placed
    CHECK_THROWS_AS(generate_scene(0, cramped), ConfigError);
}

TEST_CASE("visibility oracle distinguishes visible, occluded, and out of view") {
    SynthScene s = manual_scene();
    SceneObject wall_box;
    wall_box.id = 1;
    wall_box.category = "cabinet";
    wall_box.kind = PrimitiveKind::Box;
    wall_box.box = {{2.0, 2.5, 1.0}, {0.4, 2.0, 2.0}};
    s.objects = {wall_box};

    SynthCamera cam;
    cam.intrinsics = CameraIntrinsics{100, 100, 64, 48, 128, 96};
    cam.pose = synth::detail::look_at_pose({0.5, 2.5, 1.5}, {3.5, 2.5, 1.2});
    // the cabinet's own center: first hit is the cabinet itself
    CHECK(visibility_oracle(s, s.objects[0].center(), 0, cam) == Visibility::Visible);
    // a point behind the cabinet is occluded
    CHECK(visibility_oracle(s, {3.5, 2.5, 1.0}, -1, cam) == Visibility::Occluded);
    // a clear point in front is visible
    CHECK(visibility_oracle(s, {1.5, 2.5, 1.35}, -1, cam) == Visibility::Visible);
    // behind the camera
    CHECK(visibility_oracle(s, {-1.0, 2.5, 1.0}, -1, cam) == Visibility::OutOfView);
    double surf = 0;
    CHECK(visibility_oracle(s, {3.5, 2.5, 1.0}, -1, cam, &surf) == Visibility::Occluded);
    CHECK(surf < 2.0); // cabinet front face is the blocking surface
}

TEST_CASE("export writes a loadable manifest and exact ground truth sidecar") {
    testutil::TempDir tmp("synth_export");
    SynthParams params;
    params.n_boxes = 2;
    params.n_cylinders = 1;
    params.n_cameras = 3;
    params.image_width = 96;
    params.image_height = 72;
    params.focal = 60;
    const SynthScene scene = generate_scene(5, params);

    ExportOptions opt;
    opt.recon_scale = 2.0;
    const auto manifest_path = export_manifest(scene, tmp.path, opt);
    const SceneManifest m = load_manifest(manifest_path);
    REQUIRE(m.frames.size() == 3);
    CHECK(m.reference_heights.at("ceiling") == Catch::Approx(scene.room.height));

    ExportOptions opt_back;
    const SynthScene truth = load_scene_truth(tmp.path / "scene_truth.json", &opt_back);
    CHECK(scene_truth_json(truth, opt_back).dump() == scene_truth_json(scene, opt).dump());
    CHECK(opt_back.recon_scale == Catch::Approx(2.0));

    // exported depths are true depths divided by the recon scale
    const SynthFrame direct = render_frame(scene, scene.cameras[0]);
    const FrameData fd = load_frame_data(m, 0);
    const int ci = params.image_width / 2, cj = params.image_height / 2;
    REQUIRE(fd.depth.is_valid(ci, cj));
    CHECK(fd.depth.at(ci, cj) ==
          Catch::Approx(direct.depth.at(ci, cj) / 2.0).epsilon(1e-6));

    // recon poses keep the projection of true points identical
    const ReconFrames rf = make_recon_frames(scene, opt);
    const Vec3 p_true(2.0, 2.0, 1.0);
    const Vec3 p_recon = rf.transform.to_recon(p_true);
    const auto proj_true = project(p_true, scene.cameras[0].pose, scene.cameras[0].intrinsics);
    const auto proj_recon = project(p_recon, rf.poses[0], rf.intrinsics[0]);
    REQUIRE(proj_true.has_value());
    REQUIRE(proj_recon.has_value());
    CHECK(proj_recon->pixel.i == Catch::Approx(proj_true->pixel.i).margin(1e-9));
    CHECK(proj_recon->pixel.j == Catch::Approx(proj_true->pixel.j).margin(1e-9));
    CHECK(proj_recon->z == Catch::Approx(proj_true->z / 2.0).margin(1e-12));
}

TEST_CASE("export transform round-trips points under yaw and tilt") {
    ExportOptions opt;
    opt.recon_scale = 1.7;
    opt.world_yaw_deg = 31.0;
    opt.world_tilt_deg = 4.0;
    const ExportTransform t = export_transform(opt);
    Rng rng(9);
    for (int k = 0; k < 50; ++k) {
        const Vec3 p(rng.uniform(-4, 4), rng.uniform(-4, 4), rng.uniform(0, 3));
        CHECK((t.to_true(t.to_recon(p)) - p).norm() < 1e-12);
    }
}

TEST_CASE("cloud points from noise-free exports lie on scene surfaces") {
    SynthParams params;
    params.n_boxes = 1;
    params.n_cylinders = 1;
    params.n_cameras = 2;
    params.image_width = 96;
    params.image_height = 72;
    params.focal = 60;
    const SynthScene scene = generate_scene(11, params);
    const ReconFrames rf = make_recon_frames(scene, {});

    std::vector<FrameSample> samples;
    for (std::size_t i = 0; i < rf.depths.size(); ++i)
        samples.push_back({rf.intrinsics[i], rf.poses[i], &rf.depths[i], &rf.labels[i]});
    const LabeledPointCloud cloud = build_cloud(samples, 3);
    REQUIRE(cloud.points.size() > 500);

    std::size_t bad = 0;
    for (const auto& pt : cloud.points) {
        const Vec3 p = rf.transform.to_true(pt.position);
        bool ok = on_room_surface(scene.room, p, 1e-4);
        for (const auto& obj : scene.objects)
            ok = ok || on_object_surface(obj, p, 1e-4);
        if (!ok) ++bad;
    }
    CHECK(bad == 0);
}
