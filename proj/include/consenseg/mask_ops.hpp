#pragma once

// Mask construction and cleanup. The multilevel mask writes each cluster's
// mean feature back to the particles' origin pixels; binarize thresholds it;
// refine removes small foreground components and then fills small background
// components (in that order).

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "clusters.hpp"
#include "image.hpp"
#include "particles.hpp"

namespace consenseg {

enum class ComponentTarget { Foreground, Background };

struct ComponentMap {
    int width = 0;
    int height = 0;
    // 0 for non-target pixels, 1..count for target pixels. Components are
    // numbered by first appearance in row-major scan order.
    std::vector<std::int32_t> labels;
    std::vector<std::int64_t> sizes; // sizes[k-1] is the pixel count of component k
    std::int32_t count = 0;
};

// Union-find connected component labeling in one raster scan plus a resolve
// pass. connectivity is 4 (edge neighbors) or 8 (edge + diagonal).
inline ComponentMap connected_components(const BinaryMask& mask, ComponentTarget target,
                                         int connectivity) {
    if (connectivity != 4 && connectivity != 8)
        throw std::invalid_argument("connected_components: connectivity must be 4 or 8");
    const int w = mask.width;
    const int h = mask.height;
    const std::uint8_t want = (target == ComponentTarget::Foreground) ? 1 : 0;

    ComponentMap out;
    out.width = w;
    out.height = h;
    out.labels.assign(static_cast<std::size_t>(w) * h, 0);

    detail::UnionFind uf(static_cast<std::size_t>(w) * h);
    auto idx = [w](int r, int c) { return static_cast<std::size_t>(r) * w + c; };

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (mask.at(r, c) != want)
                continue;
            const auto me = static_cast<std::int32_t>(idx(r, c));
            if (c > 0 && mask.at(r, c - 1) == want)
                uf.unite(me, static_cast<std::int32_t>(idx(r, c - 1)));
            if (r > 0 && mask.at(r - 1, c) == want)
                uf.unite(me, static_cast<std::int32_t>(idx(r - 1, c)));
            if (connectivity == 8 && r > 0) {
                if (c > 0 && mask.at(r - 1, c - 1) == want)
                    uf.unite(me, static_cast<std::int32_t>(idx(r - 1, c - 1)));
                if (c + 1 < w && mask.at(r - 1, c + 1) == want)
                    uf.unite(me, static_cast<std::int32_t>(idx(r - 1, c + 1)));
            }
        }
    }

    std::vector<std::int32_t> root_label(static_cast<std::size_t>(w) * h, 0);
    std::int32_t next = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (mask.at(r, c) != want)
                continue;
            const std::int32_t root = uf.find(static_cast<std::int32_t>(idx(r, c)));
            if (root_label[root] == 0) {
                root_label[root] = ++next;
                out.sizes.push_back(0);
            }
            const std::int32_t label = root_label[root];
            out.labels[idx(r, c)] = label;
            out.sizes[label - 1] += 1;
        }
    }
    out.count = next;
    return out;
}

// Writes each cluster's mean feature to the origin pixel of every member
// particle. The pixel-particle mapping is a bijection, so every pixel of the
// origin raster is written exactly once.
inline MultiLevelMask multilevel_mask(const ClusterAssignment& clusters, const ParticleSystem& sys) {
    if (clusters.labels.size() != sys.size())
        throw std::invalid_argument("multilevel_mask: cluster assignment does not match system");
    if (sys.width < 1 || sys.height < 1)
        throw std::invalid_argument("multilevel_mask: system has no origin raster");
    MultiLevelMask out(sys.width, sys.height, 0.0);
    for (std::size_t i = 0; i < sys.size(); ++i) {
        const Particle& p = sys.particles[i];
        out.at(p.row, p.col) = clusters.means[clusters.labels[i]];
    }
    return out;
}

// Foreground iff value >= threshold.
inline BinaryMask binarize(const MultiLevelMask& mlm, double threshold) {
    BinaryMask out(mlm.width, mlm.height, 0);
    for (std::size_t i = 0; i < mlm.values.size(); ++i)
        out.values[i] = mlm.values[i] >= threshold ? 1 : 0;
    return out;
}

// Pass 1 flips foreground components smaller than min_fg to background, pass 2
// flips background components of the result smaller than min_bg to foreground.
// Both passes use the same connectivity. The result is a fixed point: running
// refine again changes nothing.
inline BinaryMask refine(const BinaryMask& mask, int min_fg, int min_bg, int connectivity) {
    if (min_fg < 1 || min_bg < 1)
        throw std::invalid_argument("refine: component size thresholds must be positive");

    BinaryMask out = mask;
    {
        const ComponentMap cc = connected_components(out, ComponentTarget::Foreground, connectivity);
        for (std::size_t i = 0; i < out.values.size(); ++i)
            if (cc.labels[i] != 0 && cc.sizes[cc.labels[i] - 1] < min_fg)
                out.values[i] = 0;
    }
    {
        const ComponentMap cc = connected_components(out, ComponentTarget::Background, connectivity);
        for (std::size_t i = 0; i < out.values.size(); ++i)
            if (cc.labels[i] != 0 && cc.sizes[cc.labels[i] - 1] < min_bg)
                out.values[i] = 1;
    }
    return out;
}

} // namespace consenseg
