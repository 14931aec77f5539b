#include <catch2/catch_amalgamated.hpp>
#include <fstream>
#include <sstream>

#include "gr3d/annotate.hpp"
#include "helpers.hpp"

using namespace gr3d;

namespace {

SceneObject box_at(int id, const Vec3& center, const Vec3& size) {
    SceneObject obj;
    obj.id = id;
    obj.kind = PrimitiveKind::Box;
    obj.box.center = center;
    obj.box.size = size;
    return obj;
}

/// Camera at the origin looking along +z in the aligned frame: identity
/// rotation maps aligned +z to camera forward, so depth equals aligned z.
const CameraIntrinsics kIntr{100, 100, 32, 24, 64, 48};
const CameraPose kPose{Mat3::Identity(), Vec3::Zero()};

DepthMap uniform_depth(double d) {
    DepthMap m(64, 48);
    for (int j = 0; j < 48; ++j)
        for (int i = 0; i < 64; ++i) m.set(i, j, d);
    return m;
}

} // namespace

TEST_CASE("annotate_frame classifies visibility by the depth comparison") {
    const SceneAlignment identity;
    const SceneObject obj = box_at(1, {0, 0, 4.0}, {0.2, 0.2, 0.2}); // tau = max(0.1, ~0.17)

    SECTION("surface behind the center leaves it visible") {
        const auto a = annotate_frame({obj}, identity, kIntr, kPose, uniform_depth(6.0));
        REQUIRE(a.size() == 1);
        CHECK_FALSE(a[0].culled);
        CHECK(a[0].reason == CullReason::None);
        CHECK(a[0].pixel_i == Catch::Approx(32.0));
        CHECK(a[0].pixel_j == Catch::Approx(24.0));
        CHECK(a[0].z == Catch::Approx(4.0));
        CHECK(a[0].surface == Catch::Approx(6.0));
    }
    SECTION("center deeper than surface plus tau is occluded") {
        const auto a = annotate_frame({obj}, identity, kIntr, kPose, uniform_depth(3.0));
        CHECK(a[0].culled);
        CHECK(a[0].reason == CullReason::Occluded);
    }
    SECTION("inside the tau band survives") {
        // Surface 0.1 shallower than the center, tau ~0.173: inside the band.
        const auto a = annotate_frame({obj}, identity, kIntr, kPose, uniform_depth(3.9));
        CHECK_FALSE(a[0].culled);
    }
    SECTION("behind the camera") {
        const auto a = annotate_frame({box_at(2, {0, 0, -1}, {1, 1, 1})}, identity, kIntr,
                                      kPose, uniform_depth(6.0));
        CHECK(a[0].culled);
        CHECK(a[0].reason == CullReason::BehindCamera);
    }
    SECTION("outside the image bounds") {
        const auto a = annotate_frame({box_at(3, {10, 0, 2}, {1, 1, 1})}, identity, kIntr,
                                      kPose, uniform_depth(6.0));
        CHECK(a[0].culled);
        CHECK(a[0].reason == CullReason::OutOfBounds);
    }
    SECTION("invalid depth pixels never cull") {
        DepthMap holes(64, 48); // all invalid
        const auto a = annotate_frame({obj}, identity, kIntr, kPose, holes);
        CHECK_FALSE(a[0].culled);
        CHECK(a[0].surface < 0);
    }
}

TEST_CASE("tau scales with object size, the floor, and the alignment scale") {
    const SceneAlignment identity;
    // Deep center vs shallow surface: gap of 0.5 recon units.
    const DepthMap depth = uniform_depth(3.5);

    // Small object: tau = floor = 0.1 < 0.5 -> culled.
    const auto small = annotate_frame({box_at(1, {0, 0, 4}, {0.1, 0.1, 0.1})}, identity, kIntr,
                                      kPose, depth);
    CHECK(small[0].culled);

    // Large object: half-diagonal 0.5*sqrt(3) > 0.5 -> survives.
    const auto large = annotate_frame({box_at(1, {0, 0, 4}, {1, 1, 1})}, identity, kIntr,
                                      kPose, depth);
    CHECK_FALSE(large[0].culled);

    // Raising the floor past the gap rescues the small object.
    const auto rescued = annotate_frame({box_at(1, {0, 0, 4}, {0.1, 0.1, 0.1})}, identity,
                                        kIntr, kPose, depth, 0.6);
    CHECK_FALSE(rescued[0].culled);

    // Scale 2: aligned meters, recon units halved. Center z aligned 8 -> recon 4;
    // tau 0.6 m -> 0.3 recon units, below the 0.5 gap again.
    SceneAlignment doubled;
    doubled.scale = 2.0;
    const auto scaled = annotate_frame({box_at(1, {0, 0, 8}, {0.1, 0.1, 0.1})}, doubled, kIntr,
                                       kPose, depth, 0.6);
    CHECK(scaled[0].culled);
    CHECK(scaled[0].z == Catch::Approx(4.0));
    CHECK(scaled[0].tau == Catch::Approx(0.3));
}

TEST_CASE("a larger tau floor never culls more") {
    Rng rng(11);
    const SceneAlignment identity;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<SceneObject> objects;
        for (int k = 0; k < 8; ++k)
            objects.push_back(box_at(k + 1,
                                     {rng.uniform(-1.5, 1.5), rng.uniform(-1.0, 1.0),
                                      rng.uniform(0.5, 6.0)},
                                     {rng.uniform(0.05, 0.4), rng.uniform(0.05, 0.4),
                                      rng.uniform(0.05, 0.4)}));
        const DepthMap depth = uniform_depth(rng.uniform(1.0, 5.0));
        std::size_t previous = objects.size() + 1;
        for (const double floor : {0.0, 0.1, 0.3, 1.0}) {
            const auto a = annotate_frame(objects, identity, kIntr, kPose, depth, floor);
            std::size_t culled = 0;
            for (const auto& ann : a) culled += ann.culled ? 1 : 0;
            CHECK(culled <= previous);
            previous = culled;
        }
    }
}

TEST_CASE("render_annotations draws only surviving markers") {
    ImageRgb8 image(64, 48);
    for (int j = 0; j < 48; ++j)
        for (int i = 0; i < 64; ++i) image.set(i, j, 200, 200, 200);
    const ImageRgb8 before = image;

    SECTION("no annotations leave the image byte-identical") {
        const auto placed = render_annotations(image, {});
        CHECK(placed.empty());
        CHECK(image.data == before.data);
    }
    SECTION("culled annotations are skipped") {
        Annotation a;
        a.object_id = 1;
        a.round_i = 32;
        a.round_j = 24;
        a.culled = true;
        const auto placed = render_annotations(image, {a});
        CHECK(placed.empty());
        CHECK(image.data == before.data);
    }
    SECTION("a marker paints the disk and a legible id box") {
        Annotation a;
        a.object_id = 7;
        a.round_i = 32;
        a.round_j = 24;
        const auto placed = render_annotations(image, {a});
        REQUIRE(placed.size() == 1);
        CHECK(placed[0].object_id == 7);
        CHECK_FALSE(placed[0].nudged);
        CHECK(image.data != before.data);
        // The label box encloses the projection and stays inside the image.
        CHECK(placed[0].box_x0 <= 32);
        CHECK(placed[0].box_x1 >= 32);
        bool black = false, white = false;
        for (int y = placed[0].box_y0; y <= placed[0].box_y1; ++y)
            for (int x = placed[0].box_x0; x <= placed[0].box_x1; ++x) {
                const auto k = image.index(x, y);
                black |= image.data[k] == 0 && image.data[k + 1] == 0 && image.data[k + 2] == 0;
                white |= image.data[k] == 255 && image.data[k + 1] == 255 &&
                         image.data[k + 2] == 255;
            }
        CHECK(black); // digits and border
        CHECK(white); // box fill
    }
    SECTION("coincident markers are nudged apart") {
        Annotation a;
        a.object_id = 1;
        a.round_i = 32;
        a.round_j = 24;
        Annotation b = a;
        b.object_id = 2;
        const auto placed = render_annotations(image, {a, b});
        REQUIRE(placed.size() == 2);
        CHECK_FALSE(placed[0].nudged);
        CHECK(placed[1].nudged);
        CHECK_FALSE(placed[0].overlaps(placed[1]));
    }
}

TEST_CASE("annotation sidecar lists every object with its verdict") {
    testutil::TempDir tmp("sidecar");
    Annotation visible;
    visible.object_id = 1;
    visible.pixel_i = 10.504;
    visible.pixel_j = 20.25;
    Annotation gone;
    gone.object_id = 2;
    gone.culled = true;
    gone.reason = CullReason::Occluded;

    const auto path = tmp.path / "frame_000.txt";
    write_annotation_sidecar(path, {visible, gone});

    std::ifstream in(path);
    std::string header, line1, line2;
    std::getline(in, header);
    std::getline(in, line1);
    std::getline(in, line2);
    CHECK(header == "# id i j culled reason");
    CHECK(line1 == "1 10.50 20.25 0 none");
    CHECK(line2 == "2 0.00 0.00 1 occluded");
}
