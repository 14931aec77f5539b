#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gr3d/errors.hpp"
#include "gr3d/geometry.hpp"
#include "gr3d/rng.hpp"

namespace gr3d {

/// Axis-aligned box in the aligned metric frame.
struct Box {
    Vec3 center = Vec3::Zero();
    Vec3 size = Vec3::Zero();
    Vec3 min() const { return center - 0.5 * size; }
    Vec3 max() const { return center + 0.5 * size; }
};

/// Upright cylinder: circular cross-section in xy, spanning [z_min, z_max].
struct VerticalCylinder {
    Vec2 center = Vec2::Zero();
    double radius = 0.0;
    double z_min = 0.0;
    double z_max = 0.0;
};

enum class PrimitiveKind { Box, Cylinder };

struct SceneObject {
    int id = 0;
    std::string category;
    PrimitiveKind kind = PrimitiveKind::Box;
    Box box;
    VerticalCylinder cylinder;
    std::size_t point_count = 0;
    int label = 0;               ///< source segmentation label id
    std::size_t voxel_count = 0; ///< cells in the source cluster

    Vec3 center() const {
        if (kind == PrimitiveKind::Box) return box.center;
        return {cylinder.center.x(), cylinder.center.y(),
                0.5 * (cylinder.z_min + cylinder.z_max)};
    }
};

/// Tight axis-aligned bounds of the points; each side is floored at
/// `min_side` so thin shells (a wall-facing cabinet seen from one side)
/// keep a physical extent.
inline Box fit_box(const std::vector<Vec3>& points, double min_side = 0.0) {
    if (points.empty()) throw std::invalid_argument("fit_box: no points");
    Vec3 lo = points.front(), hi = points.front();
    for (const Vec3& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    Box b;
    b.center = 0.5 * (lo + hi);
    b.size = (hi - lo).cwiseMax(min_side);
    return b;
}

struct CircleFit {
    Vec2 center = Vec2::Zero();
    double radius = 0.0;
    double rms = 0.0; ///< root-mean-square radial residual
};

/// Algebraic least-squares circle (Kasa): minimizes sum of
/// (|p - c|^2 - r^2)^2 via the linear system x^2 + y^2 = 2ax + 2by + c.
inline std::optional<CircleFit> fit_circle(const std::vector<Vec2>& pts) {
    if (pts.size() < 3) return std::nullopt;
    Eigen::MatrixXd A(pts.size(), 3);
    Eigen::VectorXd rhs(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) {
        A(k, 0) = 2.0 * pts[k].x();
        A(k, 1) = 2.0 * pts[k].y();
        A(k, 2) = 1.0;
        rhs(k) = pts[k].squaredNorm();
    }
    const auto qr = A.colPivHouseholderQr();
    if (qr.rank() < 3) return std::nullopt; // collinear points have no circle
    const Eigen::Vector3d sol = qr.solve(rhs);
    const double r2 = sol(0) * sol(0) + sol(1) * sol(1) + sol(2);
    if (!(r2 > 0) || !std::isfinite(r2)) return std::nullopt;

    CircleFit fit;
    fit.center = {sol(0), sol(1)};
    fit.radius = std::sqrt(r2);
    double ss = 0;
    for (const Vec2& p : pts) {
        const double d = (p - fit.center).norm() - fit.radius;
        ss += d * d;
    }
    fit.rms = std::sqrt(ss / static_cast<double>(pts.size()));
    return fit;
}

/// RANSAC wrapper around the algebraic fit: samples circumcircles of point
/// triples, keeps the consensus set with the most points within
/// `inlier_tol` of the circle, then refits on those inliers. Deterministic
/// for a fixed seed.
inline std::optional<CircleFit> ransac_fit_circle(const std::vector<Vec2>& pts,
                                                  double inlier_tol, int iterations,
                                                  std::uint64_t seed = 12345) {
    if (iterations < 1)
        throw std::invalid_argument("ransac_fit_circle: iterations must be >= 1");
    if (pts.size() < 3) return std::nullopt;

    auto circumcircle = [](const Vec2& a, const Vec2& b,
                           const Vec2& c) -> std::optional<std::pair<Vec2, double>> {
        const double d = 2.0 * (a.x() * (b.y() - c.y()) + b.x() * (c.y() - a.y()) +
                                c.x() * (a.y() - b.y()));
        if (std::abs(d) < 1e-12) return std::nullopt;
        const double a2 = a.squaredNorm(), b2 = b.squaredNorm(), c2 = c.squaredNorm();
        const Vec2 center{(a2 * (b.y() - c.y()) + b2 * (c.y() - a.y()) + c2 * (a.y() - b.y())) / d,
                          (a2 * (c.x() - b.x()) + b2 * (a.x() - c.x()) + c2 * (b.x() - a.x())) / d};
        return std::make_pair(center, (a - center).norm());
    };

    Rng rng(seed);
    std::size_t best_inliers = 0;
    Vec2 best_center = Vec2::Zero();
    double best_radius = 0;
    for (int it = 0; it < iterations; ++it) {
        const std::size_t i = rng.uniform_index(pts.size());
        const std::size_t j = rng.uniform_index(pts.size());
        const std::size_t k = rng.uniform_index(pts.size());
        if (i == j || j == k || i == k) continue;
        const auto cc = circumcircle(pts[i], pts[j], pts[k]);
        if (!cc) continue;
        std::size_t inliers = 0;
        for (const Vec2& p : pts)
            if (std::abs((p - cc->first).norm() - cc->second) <= inlier_tol) ++inliers;
        if (inliers > best_inliers) {
            best_inliers = inliers;
            best_center = cc->first;
            best_radius = cc->second;
        }
    }
    if (best_inliers < 3) return std::nullopt;

    std::vector<Vec2> inlier_pts;
    inlier_pts.reserve(best_inliers);
    for (const Vec2& p : pts)
        if (std::abs((p - best_center).norm() - best_radius) <= inlier_tol)
            inlier_pts.push_back(p);
    return fit_circle(inlier_pts);
}

/// Upright cylinder from an aligned point set. Points within one
/// `voxel_size` of the top (cap interiors, which bias the circle inward)
/// are excluded from the circle fit when enough lateral points remain.
inline std::optional<CircleFit> cylinder_circle_points(const std::vector<Vec3>& points,
                                                       double voxel_size,
                                                       std::vector<Vec2>* out_xy = nullptr) {
    if (points.size() < 3) return std::nullopt;
    double z_max = points.front().z();
    for (const Vec3& p : points) z_max = std::max(z_max, p.z());

    std::vector<Vec2> lateral;
    for (const Vec3& p : points)
        if (p.z() < z_max - voxel_size) lateral.push_back({p.x(), p.y()});
    if (lateral.size() < std::max<std::size_t>(10, points.size() / 4)) {
        lateral.clear();
        for (const Vec3& p : points) lateral.push_back({p.x(), p.y()});
    }
    if (out_xy) *out_xy = lateral;
    return fit_circle(lateral);
}

inline std::optional<VerticalCylinder> fit_cylinder(const std::vector<Vec3>& points,
                                                    double voxel_size, double* out_rms = nullptr) {
    const auto fit = cylinder_circle_points(points, voxel_size);
    if (!fit) return std::nullopt;
    VerticalCylinder cyl;
    cyl.center = fit->center;
    cyl.radius = fit->radius;
    cyl.z_min = points.front().z();
    cyl.z_max = points.front().z();
    for (const Vec3& p : points) {
        cyl.z_min = std::min(cyl.z_min, p.z());
        cyl.z_max = std::max(cyl.z_max, p.z());
    }
    if (out_rms) *out_rms = fit->rms;
    return cyl;
}

/// Boxes for everything except round categories whose circle fit is tight:
/// those become cylinders. `residual_threshold` is a fraction of the voxel
/// size.
inline SceneObject choose_primitive(int id, const std::string& category,
                                    const std::vector<Vec3>& points, double voxel_size,
                                    const std::set<std::string>& round_categories,
                                    double residual_threshold = 0.5) {
    SceneObject obj;
    obj.id = id;
    obj.category = category;
    obj.point_count = points.size();
    obj.box = fit_box(points, voxel_size);
    obj.kind = PrimitiveKind::Box;

    if (round_categories.count(category)) {
        double rms = 0;
        const auto cyl = fit_cylinder(points, voxel_size, &rms);
        if (cyl && rms <= residual_threshold * voxel_size) {
            obj.kind = PrimitiveKind::Cylinder;
            obj.cylinder = *cyl;
        }
    }
    return obj;
}

} // namespace gr3d
