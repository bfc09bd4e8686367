#pragma once

// Single-linkage cluster extraction over particle positions: two particles are
// in the same cluster iff a chain of hops of length <= r_merge connects them.
// A uniform grid of cell size r_merge limits candidate pairs to the same or
// adjacent cells; union-find accumulates the components. Feature values play
// no role in the linkage, only in the reported cluster means.
//
// Positions may lie anywhere in the plane (diffusion can push particles out of
// the nominal [-1,1]^2 domain); the grid is a hash map, not a bounded array.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "particles.hpp"

namespace consenseg {

namespace detail {

class UnionFind {
public:
    explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
        for (std::size_t i = 0; i < n; ++i)
            parent_[i] = static_cast<std::int32_t>(i);
    }
    std::int32_t find(std::int32_t a) {
        while (parent_[a] != a) {
            parent_[a] = parent_[parent_[a]]; // path halving
            a = parent_[a];
        }
        return a;
    }
    void unite(std::int32_t a, std::int32_t b) {
        a = find(a);
        b = find(b);
        if (a == b)
            return;
        if (rank_[a] < rank_[b])
            std::swap(a, b);
        parent_[b] = a;
        if (rank_[a] == rank_[b])
            ++rank_[a];
    }

private:
    std::vector<std::int32_t> parent_;
    std::vector<std::uint8_t> rank_;
};

struct CellBucket {
    std::vector<std::int32_t> members;
    double minx = std::numeric_limits<double>::infinity();
    double maxx = -std::numeric_limits<double>::infinity();
    double miny = std::numeric_limits<double>::infinity();
    double maxy = -std::numeric_limits<double>::infinity();
};

// Cell key packing; wraparound on extreme coordinates only ever co-buckets
// distant cells, which adds distance checks but cannot create false links.
inline std::uint64_t cell_key(std::int64_t cx, std::int64_t cy) {
    return (static_cast<std::uint64_t>(cx) & 0xffffffffULL) << 32 |
           (static_cast<std::uint64_t>(cy) & 0xffffffffULL);
}

inline double box_min_dist2(const CellBucket& a, const CellBucket& b) {
    const double dx = std::max({0.0, a.minx - b.maxx, b.minx - a.maxx});
    const double dy = std::max({0.0, a.miny - b.maxy, b.miny - a.maxy});
    return dx * dx + dy * dy;
}

inline double box_max_dist2(const CellBucket& a, const CellBucket& b) {
    const double dx = std::max(a.maxx - b.minx, b.maxx - a.minx);
    const double dy = std::max(a.maxy - b.miny, b.maxy - a.miny);
    return dx * dx + dy * dy;
}

} // namespace detail

// Connected components of the "distance <= r" graph over positions. Returns
// labels dense from 0 in order of first appearance, so the labeling does not
// depend on hash iteration order.
inline std::vector<std::int32_t> single_linkage_labels(const std::vector<Vec2>& positions,
                                                       double r_merge,
                                                       std::int32_t* count_out = nullptr) {
    if (!(r_merge > 0.0))
        throw std::invalid_argument("single_linkage_labels: r_merge must be positive");
    const std::size_t n = positions.size();
    if (n == 0) {
        if (count_out)
            *count_out = 0;
        return {};
    }

    const double r2 = r_merge * r_merge;
    detail::UnionFind uf(n);

    std::unordered_map<std::uint64_t, detail::CellBucket> grid;
    grid.reserve(n * 2);
    std::vector<std::int64_t> cxs(n), cys(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto cx = static_cast<std::int64_t>(std::floor(positions[i].x / r_merge));
        const auto cy = static_cast<std::int64_t>(std::floor(positions[i].y / r_merge));
        cxs[i] = cx;
        cys[i] = cy;
        auto& b = grid[detail::cell_key(cx, cy)];
        b.members.push_back(static_cast<std::int32_t>(i));
        b.minx = std::min(b.minx, positions[i].x);
        b.maxx = std::max(b.maxx, positions[i].x);
        b.miny = std::min(b.miny, positions[i].y);
        b.maxy = std::max(b.maxy, positions[i].y);
    }

    auto link_all_pairs = [&](const std::vector<std::int32_t>& a, const std::vector<std::int32_t>& b) {
        for (std::int32_t i : a)
            for (std::int32_t j : b) {
                if (uf.find(i) == uf.find(j))
                    continue;
                const double dx = positions[i].x - positions[j].x;
                const double dy = positions[i].y - positions[j].y;
                if (dx * dx + dy * dy <= r2)
                    uf.unite(i, j);
            }
    };

    // Within-cell links. A fully collapsed cluster puts thousands of
    // coincident points into one cell; the bounding-box shortcut turns that
    // case into a single linear union sweep.
    for (auto& [key, bucket] : grid) {
        (void)key;
        const auto& m = bucket.members;
        if (m.size() < 2)
            continue;
        const double ddx = bucket.maxx - bucket.minx;
        const double ddy = bucket.maxy - bucket.miny;
        if (ddx * ddx + ddy * ddy <= r2) {
            for (std::size_t i = 1; i < m.size(); ++i)
                uf.unite(m[0], m[i]);
        } else {
            for (std::size_t i = 0; i + 1 < m.size(); ++i)
                for (std::size_t j = i + 1; j < m.size(); ++j) {
                    if (uf.find(m[i]) == uf.find(m[j]))
                        continue;
                    const double dx = positions[m[i]].x - positions[m[j]].x;
                    const double dy = positions[m[i]].y - positions[m[j]].y;
                    if (dx * dx + dy * dy <= r2)
                        uf.unite(m[i], m[j]);
                }
        }
    }

    // Cross-cell links; each unordered adjacent cell pair is visited once.
    // Points within r_merge always land in the same or adjacent cells because
    // the cell size equals r_merge.
    static constexpr int offsets[4][2] = {{1, -1}, {1, 0}, {1, 1}, {0, 1}};
    for (auto& [key, bucket] : grid) {
        (void)key;
        const std::int64_t cx = cxs[bucket.members.front()];
        const std::int64_t cy = cys[bucket.members.front()];
        for (const auto& off : offsets) {
            const auto it = grid.find(detail::cell_key(cx + off[0], cy + off[1]));
            if (it == grid.end())
                continue;
            const detail::CellBucket& other = it->second;
            if (detail::box_min_dist2(bucket, other) > r2)
                continue;
            if (detail::box_max_dist2(bucket, other) <= r2) {
                // every cross pair is within range, so everything merges
                const std::int32_t rep = bucket.members.front();
                for (std::int32_t i : bucket.members)
                    uf.unite(rep, i);
                for (std::int32_t j : other.members)
                    uf.unite(rep, j);
            } else {
                link_all_pairs(bucket.members, other.members);
            }
        }
    }

    // Dense labels in order of first appearance.
    std::vector<std::int32_t> labels(n, -1);
    std::unordered_map<std::int32_t, std::int32_t> root_to_label;
    root_to_label.reserve(64);
    std::int32_t next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::int32_t root = uf.find(static_cast<std::int32_t>(i));
        auto [it, inserted] = root_to_label.emplace(root, next);
        if (inserted)
            ++next;
        labels[i] = it->second;
    }
    if (count_out)
        *count_out = next;
    return labels;
}

struct ClusterAssignment {
    std::vector<std::int32_t> labels; // per particle, dense from 0
    std::vector<double> means;        // mean feature per cluster
    std::vector<std::int64_t> sizes;  // particles per cluster
    std::int32_t count() const { return static_cast<std::int32_t>(means.size()); }
};

inline ClusterAssignment extract_clusters(const ParticleSystem& sys, double r_merge) {
    std::vector<Vec2> positions;
    positions.reserve(sys.size());
    for (const Particle& p : sys.particles)
        positions.push_back(p.position);

    ClusterAssignment out;
    std::int32_t count = 0;
    out.labels = single_linkage_labels(positions, r_merge, &count);
    out.means.assign(count, 0.0);
    out.sizes.assign(count, 0);
    for (std::size_t i = 0; i < sys.size(); ++i) {
        out.means[out.labels[i]] += sys.particles[i].feature;
        out.sizes[out.labels[i]] += 1;
    }
    for (std::int32_t k = 0; k < count; ++k)
        out.means[k] /= static_cast<double>(out.sizes[k]);
    return out;
}

} // namespace consenseg
