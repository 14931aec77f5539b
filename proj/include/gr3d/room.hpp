#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include "gr3d/cloud.hpp"
#include "gr3d/errors.hpp"
#include "gr3d/geometry.hpp"
#include "gr3d/voxel.hpp"

namespace gr3d {

/// Closed CCW polygon (first vertex not repeated) in the aligned xy plane,
/// plus the ceiling height estimate.
struct RoomBoundary {
    std::vector<Vec2> polygon;
    double area = 0.0;
    double height = 0.0;
};

/// Signed area, positive for counter-clockwise winding.
inline double polygon_area(const std::vector<Vec2>& poly) {
    double s = 0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % poly.size()];
        s += a.x() * b.y() - b.x() * a.y();
    }
    return 0.5 * s;
}

namespace detail {

struct GridKey {
    int x = 0, y = 0;
    bool operator<(const GridKey& o) const {
        return x != o.x ? x < o.x : y < o.y;
    }
    bool operator==(const GridKey& o) const { return x == o.x && y == o.y; }
};

/// One 3x3 dilation followed by one 3x3 erosion; fills one-cell cracks in
/// the floor occupancy map without growing the outline.
inline std::set<GridKey> morphological_close(const std::set<GridKey>& cells) {
    std::set<GridKey> dilated;
    for (const auto& c : cells)
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy) dilated.insert({c.x + dx, c.y + dy});
    std::set<GridKey> closed;
    for (const auto& c : dilated) {
        bool keep = true;
        for (int dx = -1; dx <= 1 && keep; ++dx)
            for (int dy = -1; dy <= 1 && keep; ++dy)
                if (!dilated.count({c.x + dx, c.y + dy})) keep = false;
        if (keep) closed.insert(c);
    }
    return closed;
}

inline std::set<GridKey> largest_component_4(const std::set<GridKey>& cells) {
    std::set<GridKey> seen, best;
    for (const auto& seed : cells) {
        if (seen.count(seed)) continue;
        std::set<GridKey> comp;
        std::queue<GridKey> frontier;
        frontier.push(seed);
        seen.insert(seed);
        while (!frontier.empty()) {
            const GridKey c = frontier.front();
            frontier.pop();
            comp.insert(c);
            const GridKey nbs[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
            for (const auto& nb : nbs) {
                if (!cells.count(nb) || seen.count(nb)) continue;
                seen.insert(nb);
                frontier.push(nb);
            }
        }
        if (comp.size() > best.size()) best = comp;
    }
    return best;
}

/// Traces all closed loops of directed boundary edges (occupied cell on the
/// left of each edge), in grid coordinates. Each edge is a unit segment on
/// the lattice; loops come out counter-clockwise around occupied regions.
inline std::vector<std::vector<GridKey>> trace_boundary_loops(const std::set<GridKey>& cells) {
    // Directed edge (corner a -> corner b). For each occupied cell, emit its
    // four sides oriented CCW if the neighbor across that side is empty.
    using Edge = std::pair<GridKey, GridKey>;
    std::map<GridKey, std::vector<GridKey>> next; // corner -> outgoing corners
    auto add_edge = [&next](const GridKey& a, const GridKey& b) { next[a].push_back(b); };
    for (const auto& c : cells) {
        if (!cells.count({c.x, c.y - 1})) add_edge({c.x, c.y}, {c.x + 1, c.y});         // bottom
        if (!cells.count({c.x + 1, c.y})) add_edge({c.x + 1, c.y}, {c.x + 1, c.y + 1}); // right
        if (!cells.count({c.x, c.y + 1})) add_edge({c.x + 1, c.y + 1}, {c.x, c.y + 1}); // top
        if (!cells.count({c.x - 1, c.y})) add_edge({c.x, c.y + 1}, {c.x, c.y});         // left
    }
    for (auto& [corner, outs] : next) std::sort(outs.begin(), outs.end());

    std::set<Edge> used;
    std::vector<std::vector<GridKey>> loops;
    for (const auto& [start, outs] : next) {
        for (const auto& first : outs) {
            if (used.count({start, first})) continue;
            std::vector<GridKey> loop;
            GridKey prev = start, cur = first;
            used.insert({prev, cur});
            loop.push_back(start);
            while (!(cur == start)) {
                loop.push_back(cur);
                // Prefer the leftmost turn relative to the incoming direction
                // so touching corners split into separate loops.
                const int dx = cur.x - prev.x, dy = cur.y - prev.y;
                const GridKey turn_left{cur.x - dy, cur.y + dx};
                const GridKey straight{cur.x + dx, cur.y + dy};
                const GridKey turn_right{cur.x + dy, cur.y - dx};
                GridKey chosen{};
                bool found = false;
                for (const GridKey& cand : {turn_left, straight, turn_right}) {
                    auto it = next.find(cur);
                    if (it == next.end()) continue;
                    for (const auto& out : it->second)
                        if (out == cand && !used.count({cur, out})) {
                            chosen = cand;
                            found = true;
                            break;
                        }
                    if (found) break;
                }
                if (!found) break; // open chain: abandoned (should not happen)
                used.insert({cur, chosen});
                prev = cur;
                cur = chosen;
            }
            if (cur == start && loop.size() >= 4) loops.push_back(std::move(loop));
        }
    }
    return loops;
}

/// Occupancy = closed floor cells plus every cell enclosed by the observed
/// wall/floor boundary. Cameras see the distant floor at grazing angles, so
/// visible-floor occupancy alone frays and underestimates the footprint; the
/// walls face the cameras and bound it reliably. Gaps in the observed wall
/// line let the exterior flood pour through, degrading gracefully toward the
/// floor-only region, never below it.
inline std::set<GridKey> room_occupancy(const std::set<GridKey>& floor,
                                        const std::set<GridKey>& walls) {
    std::set<GridKey> result = morphological_close(floor);
    std::set<GridKey> blocked = result;
    blocked.insert(walls.begin(), walls.end());
    blocked = morphological_close(blocked);
    if (blocked.empty()) return result;

    int lo_x = blocked.begin()->x, hi_x = lo_x, lo_y = blocked.begin()->y, hi_y = lo_y;
    for (const auto& c : blocked) {
        lo_x = std::min(lo_x, c.x);
        hi_x = std::max(hi_x, c.x);
        lo_y = std::min(lo_y, c.y);
        hi_y = std::max(hi_y, c.y);
    }
    --lo_x, --lo_y, ++hi_x, ++hi_y; // one-cell apron guarantees an outside start

    std::set<GridKey> exterior;
    std::queue<GridKey> frontier;
    frontier.push({lo_x, lo_y});
    exterior.insert({lo_x, lo_y});
    while (!frontier.empty()) {
        const GridKey c = frontier.front();
        frontier.pop();
        const GridKey nbs[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
        for (const auto& nb : nbs) {
            if (nb.x < lo_x || nb.x > hi_x || nb.y < lo_y || nb.y > hi_y) continue;
            if (blocked.count(nb) || exterior.count(nb)) continue;
            exterior.insert(nb);
            frontier.push(nb);
        }
    }
    for (int x = lo_x; x <= hi_x; ++x)
        for (int y = lo_y; y <= hi_y; ++y) {
            const GridKey k{x, y};
            if (!exterior.count(k) && !walls.count(k)) result.insert(k);
        }
    return result;
}

inline std::vector<Vec2> merge_collinear(const std::vector<Vec2>& poly) {
    if (poly.size() < 3) return poly;
    std::vector<Vec2> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& prev = poly[(i + n - 1) % n];
        const Vec2& cur = poly[i];
        const Vec2& nxt = poly[(i + 1) % n];
        const Vec2 a = cur - prev, b = nxt - cur;
        if (std::abs(a.x() * b.y() - a.y() * b.x()) > 1e-9) out.push_back(cur);
    }
    return out.size() >= 3 ? out : poly;
}

} // namespace detail

/// Room footprint from the voxelized aligned cloud: floor-voxel occupancy in
/// xy plus the wall-enclosed interior, closed morphologically, reduced to the
/// largest component, and traced into the dominant CCW boundary polygon.
/// Height is the 95th percentile of per-column topmost wall voxel faces.
inline RoomBoundary extract_room(const VoxelGrid& grid, const std::set<int>& floor_labels,
                                 const std::set<int>& wall_labels) {
    const double grid_size = grid.voxel_size;

    std::set<detail::GridKey> occ;
    std::map<detail::GridKey, double> wall_top;
    for (const auto& [vi, cell] : grid.cells) {
        const detail::GridKey k{vi.x, vi.y};
        if (floor_labels.count(cell.majority_label)) {
            occ.insert(k);
        } else if (wall_labels.count(cell.majority_label)) {
            const double top = (vi.z + 1) * grid_size;
            auto [it, fresh] = wall_top.try_emplace(k, top);
            if (!fresh) it->second = std::max(it->second, top);
        }
    }
    if (occ.size() < 4) throw DataError("extract_room: too few floor cells");

    std::set<detail::GridKey> wall_cells;
    for (const auto& [k, z] : wall_top) wall_cells.insert(k);
    const auto closed = detail::largest_component_4(detail::room_occupancy(occ, wall_cells));
    if (closed.size() < 4) throw DataError("extract_room: floor region degenerate");

    const auto loops = detail::trace_boundary_loops(closed);
    if (loops.empty()) throw DataError("extract_room: no boundary loop found");

    std::vector<Vec2> best;
    double best_area = 0;
    for (const auto& loop : loops) {
        std::vector<Vec2> poly;
        poly.reserve(loop.size());
        for (const auto& corner : loop)
            poly.push_back({corner.x * grid_size, corner.y * grid_size});
        const double a = polygon_area(poly);
        if (a > best_area) {
            best_area = a;
            best = std::move(poly);
        }
    }
    if (best.empty()) throw DataError("extract_room: no positive-area loop");

    RoomBoundary room;
    room.polygon = detail::merge_collinear(best);
    room.area = polygon_area(room.polygon);

    std::vector<double> tops;
    tops.reserve(wall_top.size());
    for (const auto& [k, z] : wall_top) tops.push_back(z);
    room.height = tops.empty() ? 0.0 : detail::percentile(std::move(tops), 95.0);
    return room;
}

} // namespace gr3d
