#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "gr3d/errors.hpp"
#include "gr3d/geometry.hpp"
#include "gr3d/manifest.hpp"

namespace gr3d {

struct LabeledPoint {
    Vec3 position;
    std::uint16_t label = 0;
    std::uint32_t frame = 0;
};

/// World-space points fused from all frames, each carrying the semantic label
/// of its source pixel.
struct LabeledPointCloud {
    std::vector<LabeledPoint> points;
};

/// Reconstruction frame -> aligned metric frame:
///   p_aligned = scale * (rotation * p_recon - (0, 0, z_offset))
/// z_offset is the floor median height in the rotated (pre-scale) frame, so
/// the floor sits at z = 0. `scale` converts reconstruction units to meters.
struct SceneAlignment {
    Mat3 rotation = Mat3::Identity();
    double z_offset = 0.0;
    double scale = 1.0;
    std::vector<std::pair<std::string, std::size_t>> provenance; ///< (category, point count)
    bool scale_warning = false; ///< true when no reference category was found

    Vec3 to_aligned(const Vec3& p_recon) const {
        Vec3 q = rotation * p_recon;
        q.z() -= z_offset;
        return scale * q;
    }
    Vec3 to_recon(const Vec3& p_aligned) const {
        Vec3 q = p_aligned / scale;
        q.z() += z_offset;
        return rotation.transpose() * q;
    }
};

/// Calibration plus decoded rasters for one frame; lets callers fuse frames
/// that never touched disk.
struct FrameSample {
    CameraIntrinsics intrinsics;
    CameraPose pose;
    const DepthMap* depth = nullptr;
    const RasterU16* labels = nullptr;
};

/// Unprojects every valid, labeled pixel on the stride lattice of each frame.
/// Output order is deterministic: frame index, then row-major pixel order.
inline LabeledPointCloud build_cloud(const std::vector<FrameSample>& frames, int stride,
                                     int threads = 1) {
    if (stride < 1) throw std::invalid_argument("build_cloud: stride must be >= 1");

    auto process = [&](std::size_t fi) {
        const FrameSample& f = frames[fi];
        std::vector<LabeledPoint> pts;
        const int w = f.intrinsics.width, h = f.intrinsics.height;
        for (int j = 0; j < h; j += stride) {
            for (int i = 0; i < w; i += stride) {
                if (!f.depth->is_valid(i, j)) continue;
                const std::uint16_t label = f.labels->at(i, j);
                if (label == 0) continue;
                const double d = f.depth->at(i, j);
                pts.push_back({unproject({double(i), double(j)}, d, f.pose, f.intrinsics),
                               label, static_cast<std::uint32_t>(fi)});
            }
        }
        return pts;
    };

    std::vector<std::vector<LabeledPoint>> parts(frames.size());
    if (threads > 1 && frames.size() > 1) {
        std::vector<std::future<std::vector<LabeledPoint>>> futs;
        futs.reserve(frames.size());
        for (std::size_t fi = 0; fi < frames.size(); ++fi)
            futs.push_back(std::async(std::launch::async, process, fi));
        for (std::size_t fi = 0; fi < frames.size(); ++fi) parts[fi] = futs[fi].get();
    } else {
        for (std::size_t fi = 0; fi < frames.size(); ++fi) parts[fi] = process(fi);
    }

    LabeledPointCloud cloud;
    std::size_t total = 0;
    for (const auto& p : parts) total += p.size();
    cloud.points.reserve(total);
    for (auto& p : parts)
        cloud.points.insert(cloud.points.end(), p.begin(), p.end());
    return cloud;
}

/// Disk-backed variant: decodes each frame's rasters on the fly.
inline LabeledPointCloud build_cloud(const SceneManifest& m, int stride, int threads = 1) {
    std::vector<FrameData> data(m.frames.size());
    std::vector<FrameSample> samples(m.frames.size());
    for (std::size_t i = 0; i < m.frames.size(); ++i) {
        data[i] = load_frame_data(m, i);
        samples[i] = {m.frames[i].intrinsics, m.frames[i].pose, &data[i].depth,
                      &data[i].labels};
    }
    return build_cloud(samples, stride, threads);
}

namespace detail {

inline Vec3 plane_normal_smallest_eigvec(const std::vector<Vec3>& pts, const Vec3& centroid) {
    Mat3 cov = Mat3::Zero();
    for (const Vec3& p : pts) {
        const Vec3 d = p - centroid;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    return es.eigenvectors().col(0); // ascending eigenvalues
}

inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double rank = q / 100.0 * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

} // namespace detail

/// Least-squares floor normal: smallest eigenvector of the centered
/// covariance of the floor points, with one 3-sigma trimming pass to shed
/// segmentation bleed, oriented so most non-floor points lie on the positive
/// side (falls back to +z agreement when there are none).
inline Vec3 estimate_up(const LabeledPointCloud& cloud, const std::set<int>& floor_labels) {
    std::vector<Vec3> floor_pts;
    Vec3 nonfloor_sum = Vec3::Zero();
    std::size_t nonfloor_n = 0;
    for (const auto& pt : cloud.points) {
        if (floor_labels.count(pt.label)) {
            floor_pts.push_back(pt.position);
        } else {
            nonfloor_sum += pt.position;
            ++nonfloor_n;
        }
    }
    if (floor_pts.size() < 50)
        throw DataError("estimate_up: insufficient floor points (" +
                        std::to_string(floor_pts.size()) + " < 50)");

    auto fit = [](const std::vector<Vec3>& pts) {
        Vec3 c = Vec3::Zero();
        for (const Vec3& p : pts) c += p;
        c /= static_cast<double>(pts.size());
        return std::make_pair(detail::plane_normal_smallest_eigvec(pts, c), c);
    };

    auto [normal, centroid] = fit(floor_pts);

    // Trim gross outliers once and refit.
    double ss = 0;
    for (const Vec3& p : floor_pts) {
        const double r = (p - centroid).dot(normal);
        ss += r * r;
    }
    const double sigma = std::sqrt(ss / static_cast<double>(floor_pts.size()));
    if (sigma > 0) {
        std::vector<Vec3> kept;
        kept.reserve(floor_pts.size());
        for (const Vec3& p : floor_pts)
            if (std::abs((p - centroid).dot(normal)) <= 3.0 * sigma) kept.push_back(p);
        if (kept.size() >= 50 && kept.size() < floor_pts.size())
            std::tie(normal, centroid) = fit(kept);
    }

    if (nonfloor_n > 0) {
        const Vec3 mean_off = nonfloor_sum / static_cast<double>(nonfloor_n) - centroid;
        if (mean_off.dot(normal) < 0) normal = -normal;
    } else if (normal.z() < 0 ||
               (normal.z() == 0 && (normal.x() < 0 || (normal.x() == 0 && normal.y() < 0)))) {
        normal = -normal;
    }
    return normal.normalized();
}

/// Dominant horizontal direction of the wall layout, folded into [0, 90)
/// degrees. Local 2D tangents of wall points (principal direction of each
/// xy-neighborhood) are folded mod 90 into a 1-degree histogram; the returned
/// angle maximizes the tangent count within +-5 degrees and is refined by the
/// circular mean of the winning window. Expects an up-aligned cloud (z = up);
/// `neighbor_radius` is in the cloud's current units.
inline double estimate_dominant_direction(const LabeledPointCloud& cloud,
                                          const std::set<int>& wall_labels,
                                          double neighbor_radius = 0.15) {
    std::vector<Vec2> wall;
    for (const auto& pt : cloud.points)
        if (wall_labels.count(pt.label))
            wall.push_back({pt.position.x(), pt.position.y()});
    if (wall.size() < 100)
        throw DataError("estimate_dominant_direction: insufficient wall points (" +
                        std::to_string(wall.size()) + " < 100)");

    // Hash grid over xy for neighbor lookups.
    const double cell = neighbor_radius;
    auto key = [cell](const Vec2& p) {
        return std::make_pair(static_cast<long long>(std::floor(p.x() / cell)),
                              static_cast<long long>(std::floor(p.y() / cell)));
    };
    std::map<std::pair<long long, long long>, std::vector<std::uint32_t>> grid;
    for (std::uint32_t idx = 0; idx < wall.size(); ++idx)
        grid[key(wall[idx])].push_back(idx);

    const double r2 = neighbor_radius * neighbor_radius;
    std::vector<double> folded; // tangent angles in [0, 90)
    folded.reserve(wall.size());
    for (std::uint32_t idx = 0; idx < wall.size(); ++idx) {
        const Vec2& p = wall[idx];
        const auto [kx, ky] = key(p);
        double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
        int n = 0;
        for (long long dx = -1; dx <= 1; ++dx) {
            for (long long dy = -1; dy <= 1; ++dy) {
                auto it = grid.find({kx + dx, ky + dy});
                if (it == grid.end()) continue;
                for (const std::uint32_t nb : it->second) {
                    const Vec2 d = wall[nb] - p;
                    if (d.squaredNorm() > r2) continue;
                    sx += wall[nb].x();
                    sy += wall[nb].y();
                    sxx += wall[nb].x() * wall[nb].x();
                    sxy += wall[nb].x() * wall[nb].y();
                    syy += wall[nb].y() * wall[nb].y();
                    ++n;
                }
            }
        }
        if (n < 5) continue;
        const double mx = sx / n, my = sy / n;
        const double cxx = sxx / n - mx * mx;
        const double cxy = sxy / n - mx * my;
        const double cyy = syy / n - my * my;
        if (cxx + cyy < 1e-12) continue;
        // Principal direction of the 2x2 covariance.
        const double theta = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
        double deg = theta * 180.0 / 3.14159265358979323846;
        deg = std::fmod(deg, 90.0);
        if (deg < 0) deg += 90.0;
        folded.push_back(deg);
    }
    if (folded.size() < 50)
        throw DataError("estimate_dominant_direction: too few usable wall tangents");

    int hist[90] = {0};
    for (const double a : folded) {
        int b = static_cast<int>(std::floor(a));
        if (b > 89) b = 89;
        ++hist[b];
    }
    int best_theta = 0, best_count = -1;
    for (int theta = 0; theta < 90; ++theta) {
        int count = 0;
        for (int d = -5; d <= 5; ++d) count += hist[((theta + d) % 90 + 90) % 90];
        if (count > best_count) {
            best_count = count;
            best_theta = theta;
        }
    }

    // Circular mean (period 90 degrees) of the tangents inside the window.
    double cs = 0, sn = 0;
    for (const double a : folded) {
        double diff = std::fmod(a - best_theta + 45.0 + 900.0, 90.0) - 45.0;
        if (std::abs(diff) > 5.5) continue;
        const double rad4 = a * 4.0 * 3.14159265358979323846 / 180.0;
        cs += std::cos(rad4);
        sn += std::sin(rad4);
    }
    if (cs == 0 && sn == 0) return static_cast<double>(best_theta);
    double deg = std::atan2(sn, cs) * 180.0 / 3.14159265358979323846 / 4.0;
    deg = std::fmod(deg, 90.0);
    if (deg < 0) deg += 90.0;
    return deg;
}

struct AxisAlignResult {
    LabeledPointCloud cloud;
    Mat3 rotation;   ///< recon -> aligned (up to +z, dominant direction to +x)
    double z_offset; ///< floor median height in the rotated frame
};

/// Rotates the cloud so `up` maps to +z and the dominant direction (yaw in
/// degrees, measured in the up-aligned frame) maps to +x, then shifts z so
/// the floor median sits at 0.
inline AxisAlignResult axis_align(const LabeledPointCloud& cloud, const Vec3& up,
                                  double yaw_deg, const std::set<int>& floor_labels) {
    const Mat3 R_up = rotation_between(up.normalized(), Vec3::UnitZ());
    const Mat3 R = rotation_z(-yaw_deg * 3.14159265358979323846 / 180.0) * R_up;

    AxisAlignResult out;
    out.rotation = R;
    out.cloud.points.reserve(cloud.points.size());
    std::vector<double> floor_z;
    for (const auto& pt : cloud.points) {
        LabeledPoint q = pt;
        q.position = R * pt.position;
        if (floor_labels.count(pt.label)) floor_z.push_back(q.position.z());
        out.cloud.points.push_back(q);
    }
    out.z_offset = floor_z.empty() ? 0.0 : detail::percentile(std::move(floor_z), 50.0);
    for (auto& pt : out.cloud.points) pt.position.z() -= out.z_offset;
    return out;
}

struct ScaleEstimate {
    double scale = 1.0;
    bool warning = false; ///< no reference category found
    std::vector<std::pair<std::string, std::size_t>> provenance;
};

/// Metric scale from reference object heights. For each reference category
/// present, reconstructed height = p95(z) - p5(z) of its points (the ceiling
/// uses its absolute median z; the floor is at z = 0 after alignment), and
/// the scale is the median of real/reconstructed ratios. Categories with
/// fewer than `min_points` points are ignored.
inline ScaleEstimate recover_scale(const LabeledPointCloud& aligned_cloud,
                                   const std::map<int, std::string>& labels,
                                   const std::map<std::string, double>& reference_heights,
                                   std::size_t min_points = 20) {
    std::map<std::string, std::vector<double>> zs; // category -> z values
    for (const auto& pt : aligned_cloud.points) {
        auto it = labels.find(pt.label);
        if (it == labels.end()) continue;
        if (!reference_heights.count(it->second)) continue;
        zs[it->second].push_back(pt.position.z());
    }

    ScaleEstimate est;
    std::vector<double> ratios;
    for (auto& [category, values] : zs) {
        if (values.size() < min_points) continue;
        const double recon_h =
            category == "ceiling"
                ? detail::percentile(values, 50.0)
                : detail::percentile(values, 95.0) - detail::percentile(values, 5.0);
        if (!(recon_h > 1e-9)) continue;
        ratios.push_back(reference_heights.at(category) / recon_h);
        est.provenance.emplace_back(category, values.size());
    }
    if (ratios.empty()) {
        est.scale = 1.0;
        est.warning = true;
        return est;
    }
    std::sort(ratios.begin(), ratios.end());
    const std::size_t n = ratios.size();
    est.scale = (n % 2 == 1) ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
    return est;
}

/// Binary little-endian PLY with per-vertex label, for eyeballing clouds in
/// external viewers.
inline void write_ply(const LabeledPointCloud& cloud, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write ply: " + path.string());
    out << "ply\nformat binary_little_endian 1.0\n"
        << "element vertex " << cloud.points.size() << "\n"
        << "property float x\nproperty float y\nproperty float z\n"
        << "property ushort label\nend_header\n";
    for (const auto& pt : cloud.points) {
        const float xyz[3] = {static_cast<float>(pt.position.x()),
                              static_cast<float>(pt.position.y()),
                              static_cast<float>(pt.position.z())};
        out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
        out.write(reinterpret_cast<const char*>(&pt.label), sizeof(pt.label));
    }
}

} // namespace gr3d
