#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "gr3d/errors.hpp"

namespace gr3d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Points with camera-space depth at or below this are treated as behind the
/// camera; keeps the projective division away from the pole.
inline constexpr double kMinProjectionDepth = 1e-9;

inline bool is_rotation(const Mat3& R, double tol = 1e-6) {
    return (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
           std::abs(R.determinant() - 1.0) <= tol;
}

/// Pinhole intrinsics. Pixel (i, j) = (column, row), continuous coordinates,
/// origin at the top-left; integer coordinates address sample centers.
struct CameraIntrinsics {
    double fx = 1, fy = 1, cx = 0, cy = 0;
    int width = 0, height = 0;

    CameraIntrinsics() = default;
    CameraIntrinsics(double fx_, double fy_, double cx_, double cy_, int w, int h)
        : fx(fx_), fy(fy_), cx(cx_), cy(cy_), width(w), height(h) {
        if (!(fx > 0) || !(fy > 0))
            throw std::invalid_argument("intrinsics: focal lengths must be positive");
        if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height))
            throw std::invalid_argument("intrinsics: principal point outside image");
    }

    Mat3 matrix() const {
        Mat3 K = Mat3::Identity();
        K(0, 0) = fx;
        K(1, 1) = fy;
        K(0, 2) = cx;
        K(1, 2) = cy;
        return K;
    }
};

/// Rigid transform p' = R p + t. Unvalidated; CameraPose checks rotation
/// invariants at construction.
struct RigidTransform {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return R * p + t; }
};

inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    return {a.R * b.R, a.R * b.t + a.t};
}

inline RigidTransform invert(const RigidTransform& a) {
    return {a.R.transpose(), -(a.R.transpose() * a.t)};
}

/// World-to-camera extrinsics: camera point = R * world + t, +z forward.
struct CameraPose {
    Mat3 R = Mat3::Identity();
    Vec3 t = Vec3::Zero();

    CameraPose() = default;
    CameraPose(const Mat3& R_, const Vec3& t_) : R(R_), t(t_) {
        if (!is_rotation(R))
            throw std::invalid_argument("pose: R is not a rotation matrix");
    }

    RigidTransform world_to_camera() const { return {R, t}; }
    RigidTransform camera_to_world() const { return invert({R, t}); }
    /// Camera center in world coordinates.
    Vec3 center() const { return -(R.transpose() * t); }
};

/// Continuous pixel coordinates: i = column, j = row.
struct PixelCoord {
    double i = 0, j = 0;

    bool in_bounds(int width, int height) const {
        return i >= 0 && i < width && j >= 0 && j < height;
    }
    int round_i() const { return static_cast<int>(std::lround(i)); }
    int round_j() const { return static_cast<int>(std::lround(j)); }
};

struct Projection {
    PixelCoord pixel;
    double z = 0; ///< camera-space depth
};

/// Projects a world point; empty when the point is at or behind the camera.
/// No bounds check here, callers decide what off-image pixels mean.
inline std::optional<Projection> project(const Vec3& world, const CameraPose& pose,
                                         const CameraIntrinsics& K) {
    const Vec3 c = pose.R * world + pose.t;
    if (c.z() <= kMinProjectionDepth) return std::nullopt;
    return Projection{{K.fx * c.x() / c.z() + K.cx, K.fy * c.y() / c.z() + K.cy},
                      c.z()};
}

/// Inverse of project for a known depth d > 0 along the camera forward axis.
inline Vec3 unproject(const PixelCoord& p, double d, const CameraPose& pose,
                      const CameraIntrinsics& K) {
    if (!(d > 0)) throw std::invalid_argument("unproject: depth must be positive");
    const Vec3 cam(d * (p.i - K.cx) / K.fx, d * (p.j - K.cy) / K.fy, d);
    return pose.R.transpose() * (cam - pose.t);
}

/// Per-pixel z-depth raster with a validity mask. Values are in whatever
/// linear unit the producer used (meters for calibrated input, reconstruction
/// units otherwise).
struct DepthMap {
    int width = 0, height = 0;
    std::vector<float> depth;    ///< size width*height, row-major
    std::vector<std::uint8_t> valid;

    DepthMap() = default;
    DepthMap(int w, int h)
        : width(w), height(h),
          depth(static_cast<std::size_t>(w) * h, 0.f),
          valid(static_cast<std::size_t>(w) * h, 0) {}

    std::size_t index(int i, int j) const {
        return static_cast<std::size_t>(j) * width + i;
    }
    bool is_valid(int i, int j) const { return valid[index(i, j)] != 0; }
    double at(int i, int j) const { return depth[index(i, j)]; }
    void set(int i, int j, double d) {
        const auto k = index(i, j);
        if (d > 0 && std::isfinite(d)) {
            depth[k] = static_cast<float>(d);
            valid[k] = 1;
        } else {
            depth[k] = 0.f;
            valid[k] = 0;
        }
    }
};

/// Rotation by angle (radians) about a unit axis (Rodrigues).
inline Mat3 axis_angle(const Vec3& axis, double angle) {
    Mat3 K;
    K << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
    return Mat3::Identity() + std::sin(angle) * K + (1 - std::cos(angle)) * K * K;
}

/// Rotation about +z by angle (radians).
inline Mat3 rotation_z(double angle) {
    Mat3 R = Mat3::Identity();
    const double c = std::cos(angle), s = std::sin(angle);
    R(0, 0) = c; R(0, 1) = -s;
    R(1, 0) = s; R(1, 1) = c;
    return R;
}

/// Shortest rotation taking unit vector `from` onto unit vector `to`.
inline Mat3 rotation_between(const Vec3& from, const Vec3& to) {
    const double c = from.dot(to);
    Vec3 axis = from.cross(to);
    const double s = axis.norm();
    if (s < 1e-12) {
        if (c > 0) return Mat3::Identity();
        // Opposite vectors: rotate pi about any axis orthogonal to `from`.
        Vec3 ortho = std::abs(from.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
        ortho = (ortho - from * from.dot(ortho)).normalized();
        return axis_angle(ortho, 3.14159265358979323846);
    }
    axis /= s;
    return axis_angle(axis, std::atan2(s, c));
}

} // namespace gr3d
