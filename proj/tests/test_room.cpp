#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gr3d/room.hpp"
#include "gr3d/voxel.hpp"

using namespace gr3d;

namespace {

constexpr double kVoxel = 0.05;

/// Floor points at every cell center of [0,w)x[0,d), plus perimeter wall
/// columns up to `height`.
LabeledPointCloud rectangular_room_cloud(double w, double d, double height,
                                         bool cut_corner = false, double cut_w = 0.0,
                                         double cut_d = 0.0) {
    LabeledPointCloud cloud;
    auto in_cut = [&](double x, double y) {
        return cut_corner && x > w - cut_w && y > d - cut_d;
    };
    const int nx = static_cast<int>(std::lround(w / kVoxel));
    const int ny = static_cast<int>(std::lround(d / kVoxel));
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const double x = (i + 0.5) * kVoxel, y = (j + 0.5) * kVoxel;
            if (in_cut(x, y)) continue;
            cloud.points.push_back({{x, y, 0.01}, 1, 0});
        }
    if (height > 0) {
        const int nz = static_cast<int>(std::lround(height / kVoxel));
        // walls start one cell up so ground cells stay floor-majority
        auto add_column = [&](double x, double y) {
            if (in_cut(x, y)) return;
            for (int k = 1; k < nz; ++k)
                cloud.points.push_back({{x, y, (k + 0.5) * kVoxel}, 2, 0});
        };
        for (int i = 0; i < nx; ++i) {
            add_column((i + 0.5) * kVoxel, 0.5 * kVoxel);
            add_column((i + 0.5) * kVoxel, d - 0.5 * kVoxel);
        }
        for (int j = 0; j < ny; ++j) {
            add_column(0.5 * kVoxel, (j + 0.5) * kVoxel);
            add_column(w - 0.5 * kVoxel, (j + 0.5) * kVoxel);
        }
    }
    return cloud;
}

} // namespace

TEST_CASE("polygon_area is the signed shoelace area") {
    const std::vector<Vec2> ccw = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
    CHECK(polygon_area(ccw) == Catch::Approx(1.0));
    const std::vector<Vec2> cw = {{0, 0}, {0, 1}, {1, 1}, {1, 0}};
    CHECK(polygon_area(cw) == Catch::Approx(-1.0));
    const std::vector<Vec2> tri = {{0, 0}, {2, 0}, {0, 3}};
    CHECK(polygon_area(tri) == Catch::Approx(3.0));
}

TEST_CASE("extract_room traces a rectangular footprint exactly") {
    const auto cloud = rectangular_room_cloud(4.0, 5.0, 2.4);
    const auto grid = voxelize(cloud, kVoxel, 1);
    const auto room = extract_room(grid, {1}, {2});

    CHECK(room.area == Catch::Approx(20.0).margin(1e-9));
    CHECK(polygon_area(room.polygon) > 0);
    REQUIRE(room.polygon.size() == 4);
    double min_x = 1e9, max_x = -1e9, min_y = 1e9, max_y = -1e9;
    for (const auto& v : room.polygon) {
        min_x = std::min(min_x, v.x());
        max_x = std::max(max_x, v.x());
        min_y = std::min(min_y, v.y());
        max_y = std::max(max_y, v.y());
    }
    CHECK(min_x == Catch::Approx(0.0).margin(1e-9));
    CHECK(max_x == Catch::Approx(4.0).margin(1e-9));
    CHECK(max_y == Catch::Approx(5.0).margin(1e-9));

    SECTION("height is the 95th percentile of wall column tops") {
        CHECK(room.height == Catch::Approx(2.4).margin(1e-9));
    }
}

TEST_CASE("extract_room handles an L-shaped footprint") {
    const auto cloud = rectangular_room_cloud(4.0, 5.0, 2.4, true, 1.5, 2.0);
    const auto grid = voxelize(cloud, kVoxel, 1);
    const auto room = extract_room(grid, {1}, {2});

    CHECK(room.area == Catch::Approx(4.0 * 5.0 - 1.5 * 2.0).margin(1e-9));
    CHECK(room.polygon.size() == 6);
    CHECK(polygon_area(room.polygon) > 0);
}

TEST_CASE("extract_room height survives a few tall outlier columns") {
    auto cloud = rectangular_room_cloud(4.0, 5.0, 2.4);
    // four spurious wall columns reaching far above the ceiling
    for (int c = 0; c < 4; ++c)
        for (int k = 0; k < 60; ++k)
            cloud.points.push_back({{0.5 + c, 0.5 * kVoxel, (k + 0.5) * kVoxel}, 2, 0});
    const auto grid = voxelize(cloud, kVoxel, 1);
    const auto room = extract_room(grid, {1}, {2});
    CHECK(room.height == Catch::Approx(2.4).margin(1e-9));
}

TEST_CASE("extract_room ignores detached floor islands") {
    auto cloud = rectangular_room_cloud(4.0, 5.0, 0.0);
    // island well outside the main footprint
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            cloud.points.push_back({{8.0 + (i + 0.5) * kVoxel, (j + 0.5) * kVoxel, 0.01}, 1, 0});
    const auto grid = voxelize(cloud, kVoxel, 1);
    const auto room = extract_room(grid, {1}, {2});
    CHECK(room.area == Catch::Approx(20.0).margin(1e-9));
    CHECK(room.height == 0.0);
}

TEST_CASE("extract_room closes small interior holes") {
    auto cloud = rectangular_room_cloud(4.0, 5.0, 0.0);
    // knock out a single interior cell: closing should heal it and the area
    // must not change
    LabeledPointCloud holed;
    for (const auto& pt : cloud.points) {
        if (std::abs(pt.position.x() - 2.025) < 1e-9 && std::abs(pt.position.y() - 2.525) < 1e-9)
            continue;
        holed.points.push_back(pt);
    }
    const auto grid = voxelize(holed, kVoxel, 1);
    const auto room = extract_room(grid, {1}, {2});
    CHECK(room.area == Catch::Approx(20.0).margin(1e-9));
}

TEST_CASE("extract_room rejects degenerate input") {
    SECTION("no floor cells") {
        LabeledPointCloud cloud;
        for (int k = 0; k < 100; ++k)
            cloud.points.push_back({{0.01 * k, 0.0, 1.0}, 2, 0});
        const auto grid = voxelize(cloud, kVoxel, 1);
        CHECK_THROWS_AS(extract_room(grid, {1}, {2}), DataError);
    }
    SECTION("too few floor cells") {
        LabeledPointCloud cloud;
        cloud.points.push_back({{0.01, 0.01, 0.01}, 1, 0});
        const auto grid = voxelize(cloud, kVoxel, 1);
        CHECK_THROWS_AS(extract_room(grid, {1}, {2}), DataError);
    }
}
