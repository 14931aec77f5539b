#pragma once

#include <cstdint>
#include <cstddef>
#include <map>
#include <queue>
#include <tuple>
#include <vector>

#include "gr3d/cloud.hpp"
#include "gr3d/errors.hpp"
#include "gr3d/geometry.hpp"

namespace gr3d {

struct VoxelIndex {
    int x = 0, y = 0, z = 0;
    bool operator<(const VoxelIndex& o) const {
        return std::tie(x, y, z) < std::tie(o.x, o.y, o.z);
    }
    bool operator==(const VoxelIndex& o) const {
        return x == o.x && y == o.y && z == o.z;
    }
};

struct VoxelCell {
    std::uint16_t majority_label = 0;
    std::size_t count = 0; ///< points carrying the majority label
    std::size_t total = 0; ///< all points that fell in the cell
};

/// Sparse voxelization of a labeled cloud. Each occupied cell stores the
/// majority label among its points (ties break toward the smaller id).
/// Cells whose majority count falls below `min_points` are dropped;
/// `dropped_cells`/`dropped_points` record how much was discarded.
struct VoxelGrid {
    double voxel_size = 0.05;
    std::map<VoxelIndex, VoxelCell> cells;
    std::size_t dropped_cells = 0;
    std::size_t dropped_points = 0;

    VoxelIndex index_of(const Vec3& p) const {
        return {static_cast<int>(std::floor(p.x() / voxel_size)),
                static_cast<int>(std::floor(p.y() / voxel_size)),
                static_cast<int>(std::floor(p.z() / voxel_size))};
    }
    Vec3 cell_min(const VoxelIndex& v) const {
        return {v.x * voxel_size, v.y * voxel_size, v.z * voxel_size};
    }
    Vec3 cell_center(const VoxelIndex& v) const {
        return cell_min(v) + Vec3::Constant(0.5 * voxel_size);
    }
};

inline VoxelGrid voxelize(const LabeledPointCloud& cloud, double voxel_size,
                          std::size_t min_points) {
    if (!(voxel_size > 0)) throw std::invalid_argument("voxelize: voxel_size must be > 0");

    VoxelGrid grid;
    grid.voxel_size = voxel_size;
    std::map<VoxelIndex, std::map<std::uint16_t, std::size_t>> hist;
    for (const auto& pt : cloud.points)
        ++hist[grid.index_of(pt.position)][pt.label];

    for (const auto& [vi, counts] : hist) {
        std::uint16_t best_label = 0;
        std::size_t best_count = 0, total = 0;
        for (const auto& [label, count] : counts) {
            total += count;
            if (count > best_count) { // first map key wins ties: smallest id
                best_count = count;
                best_label = label;
            }
        }
        if (best_count < min_points) {
            ++grid.dropped_cells;
            grid.dropped_points += total;
            continue;
        }
        grid.cells[vi] = {best_label, best_count, total};
    }
    return grid;
}

struct VoxelCluster {
    std::uint16_t label = 0;
    std::vector<VoxelIndex> cells; ///< sorted by (x, y, z)
};

/// 26-connected components of same-label cells. Clusters smaller than
/// `min_voxels` cells are discarded. Output order is deterministic:
/// ascending (min z, then min x, then min y) over the cluster's cells.
inline std::vector<VoxelCluster> find_clusters(const VoxelGrid& grid,
                                               std::size_t min_voxels) {
    std::map<VoxelIndex, bool> visited;
    std::vector<VoxelCluster> clusters;

    for (const auto& [seed, cell] : grid.cells) {
        if (visited[seed]) continue;
        VoxelCluster cluster;
        cluster.label = cell.majority_label;
        std::queue<VoxelIndex> frontier;
        frontier.push(seed);
        visited[seed] = true;
        while (!frontier.empty()) {
            const VoxelIndex v = frontier.front();
            frontier.pop();
            cluster.cells.push_back(v);
            for (int dx = -1; dx <= 1; ++dx)
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dz = -1; dz <= 1; ++dz) {
                        if (dx == 0 && dy == 0 && dz == 0) continue;
                        const VoxelIndex nb{v.x + dx, v.y + dy, v.z + dz};
                        auto it = grid.cells.find(nb);
                        if (it == grid.cells.end()) continue;
                        if (it->second.majority_label != cluster.label) continue;
                        if (visited[nb]) continue;
                        visited[nb] = true;
                        frontier.push(nb);
                    }
        }
        if (cluster.cells.size() < min_voxels) continue;
        std::sort(cluster.cells.begin(), cluster.cells.end());
        clusters.push_back(std::move(cluster));
    }

    std::sort(clusters.begin(), clusters.end(),
              [](const VoxelCluster& a, const VoxelCluster& b) {
                  int az = a.cells[0].z, bz = b.cells[0].z;
                  for (const auto& c : a.cells) az = std::min(az, c.z);
                  for (const auto& c : b.cells) bz = std::min(bz, c.z);
                  if (az != bz) return az < bz;
                  int ax = a.cells[0].x, bx = b.cells[0].x;
                  for (const auto& c : a.cells) ax = std::min(ax, c.x);
                  for (const auto& c : b.cells) bx = std::min(bx, c.x);
                  if (ax != bx) return ax < bx;
                  int ay = a.cells[0].y, by = b.cells[0].y;
                  for (const auto& c : a.cells) ay = std::min(ay, c.y);
                  for (const auto& c : b.cells) by = std::min(by, c.y);
                  if (ay != by) return ay < by;
                  return a.label < b.label;
              });
    return clusters;
}

/// Points from `cloud` that fall inside the cluster's cells and carry the
/// cluster's label (other labels in the same cell are segmentation bleed).
inline std::vector<Vec3> cluster_member_points(const LabeledPointCloud& cloud,
                                               const VoxelGrid& grid,
                                               const VoxelCluster& cluster) {
    std::set<VoxelIndex> cells(cluster.cells.begin(), cluster.cells.end());
    std::vector<Vec3> members;
    for (const auto& pt : cloud.points) {
        if (pt.label != cluster.label) continue;
        if (!cells.count(grid.index_of(pt.position))) continue;
        members.push_back(pt.position);
    }
    return members;
}

} // namespace gr3d
