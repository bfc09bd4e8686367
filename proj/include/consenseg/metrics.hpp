#pragma once

// Segmentation quality metrics over binary masks: confusion counts, volumetric
// Dice, Jaccard, F_beta, precision, sensitivity, and a boundary-aware Surface
// Dice computed from exact Euclidean distance transforms. All ratio metrics
// use the 0/0 -> 1 convention (two empty masks agree perfectly).

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "image.hpp"

namespace consenseg {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;
};

inline ConfusionCounts confusion(const BinaryMask& pred, const BinaryMask& truth) {
    if (pred.width != truth.width || pred.height != truth.height)
        throw std::invalid_argument("confusion: mask dimensions differ");
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        const bool p = pred.values[i] != 0;
        const bool t = truth.values[i] != 0;
        if (p && t)
            ++c.tp;
        else if (p && !t)
            ++c.fp;
        else if (!p && t)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

inline double volumetric_dice(const ConfusionCounts& c) {
    const std::int64_t den = 2 * c.tp + c.fp + c.fn;
    if (den == 0)
        return 1.0;
    return 2.0 * static_cast<double>(c.tp) / static_cast<double>(den);
}

inline double jaccard(const ConfusionCounts& c) {
    const std::int64_t den = c.tp + c.fp + c.fn;
    if (den == 0)
        return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(den);
}

inline double precision(const ConfusionCounts& c) {
    const std::int64_t den = c.tp + c.fp;
    if (den == 0)
        return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(den);
}

inline double sensitivity(const ConfusionCounts& c) {
    const std::int64_t den = c.tp + c.fn;
    if (den == 0)
        return 1.0;
    return static_cast<double>(c.tp) / static_cast<double>(den);
}

// F_beta in count form, (b^2+1)tp / ((b^2+1)tp + b^2 fn + fp). All terms are
// exact integers in double, so f_beta(c, 1) is bit-identical to
// volumetric_dice(c). beta -> infinity approaches sensitivity.
inline double f_beta(const ConfusionCounts& c, double beta) {
    if (!(beta > 0.0))
        throw std::domain_error("f_beta: beta must be positive");
    const double b2 = beta * beta;
    const double num = (b2 + 1.0) * static_cast<double>(c.tp);
    const double den = (b2 + 1.0) * static_cast<double>(c.tp) + b2 * static_cast<double>(c.fn) +
                       static_cast<double>(c.fp);
    if (den == 0.0)
        return 1.0;
    return num / den;
}

inline double loss(double metric_value) {
    if (!(metric_value >= 0.0 && metric_value <= 1.0))
        throw std::domain_error("loss: metric value outside [0,1]");
    return 1.0 - metric_value;
}

// ---------------------------------------------------------------------------
// Exact squared Euclidean distance transform (two-pass lower-envelope method).
// With seeds on the integer grid every output is an exact integer in double.

namespace detail {

inline void sedt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                    std::vector<double>& z, int n) {
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            const int p = v[k];
            s = ((f[q] + static_cast<double>(q) * q) - (f[p] + static_cast<double>(p) * p)) /
                (2.0 * q - 2.0 * p);
            if (s > z[k])
                break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q)
            ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

} // namespace detail

// Squared distance to the nearest seed pixel (center-to-center, pixel units).
// Pixels unreachable from any seed keep a large sentinel (>= 1e15).
inline std::vector<double> squared_distance_transform(int width, int height,
                                                      const std::vector<std::uint8_t>& seeds) {
    if (width < 1 || height < 1)
        throw std::invalid_argument("squared_distance_transform: bad dimensions");
    if (seeds.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("squared_distance_transform: seed raster size mismatch");

    // Large finite value rather than infinity so envelope intersections stay finite.
    const double big = 1e15;
    std::vector<double> dist(seeds.size());
    const int nmax = std::max(width, height);
    std::vector<double> f(nmax), d(nmax), z(nmax + 1);
    std::vector<int> v(nmax);

    // columns
    for (int c = 0; c < width; ++c) {
        for (int r = 0; r < height; ++r)
            f[r] = seeds[static_cast<std::size_t>(r) * width + c] ? 0.0 : big;
        detail::sedt_1d(f, d, v, z, height);
        for (int r = 0; r < height; ++r)
            dist[static_cast<std::size_t>(r) * width + c] = d[r];
    }
    // rows
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c)
            f[c] = dist[static_cast<std::size_t>(r) * width + c];
        detail::sedt_1d(f, d, v, z, width);
        for (int c = 0; c < width; ++c)
            dist[static_cast<std::size_t>(r) * width + c] = d[c];
    }
    return dist;
}

// ---------------------------------------------------------------------------
// Border regions. A boundary pixel is a foreground pixel with at least one
// background 4-neighbor, where everything outside the image frame counts as
// background. The border region at tolerance tau contains every pixel whose
// Euclidean distance to the nearest boundary pixel is <= tau (tau in pixel
// units). A mask with no foreground has an empty border region.

struct BorderRegion {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> membership;
    std::int64_t count = 0;
};

inline std::vector<std::uint8_t> boundary_pixels(const BinaryMask& mask) {
    const int w = mask.width;
    const int h = mask.height;
    std::vector<std::uint8_t> seeds(static_cast<std::size_t>(w) * h, 0);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (!mask.at(r, c))
                continue;
            const bool edge = r == 0 || r == h - 1 || c == 0 || c == w - 1;
            const bool bg_neighbor = (r > 0 && !mask.at(r - 1, c)) || (r + 1 < h && !mask.at(r + 1, c)) ||
                                     (c > 0 && !mask.at(r, c - 1)) || (c + 1 < w && !mask.at(r, c + 1));
            if (edge || bg_neighbor)
                seeds[static_cast<std::size_t>(r) * w + c] = 1;
        }
    }
    return seeds;
}

inline BorderRegion border_region(const BinaryMask& mask, double tau) {
    if (!(tau >= 0.0))
        throw std::domain_error("border_region: tau must be nonnegative");
    BorderRegion out;
    out.width = mask.width;
    out.height = mask.height;
    out.membership.assign(mask.values.size(), 0);

    const std::vector<std::uint8_t> seeds = boundary_pixels(mask);
    bool any = false;
    for (std::uint8_t s : seeds)
        if (s) {
            any = true;
            break;
        }
    if (!any)
        return out;

    const std::vector<double> d2 = squared_distance_transform(mask.width, mask.height, seeds);
    const double tau2 = tau * tau;
    for (std::size_t i = 0; i < d2.size(); ++i) {
        if (d2[i] <= tau2) {
            out.membership[i] = 1;
            ++out.count;
        }
    }
    return out;
}

// Overlap of the two masks' border regions at tolerance tau. Two masks with
// empty borders score 1.
inline double surface_dice(const BinaryMask& pred, const BinaryMask& truth, double tau) {
    if (pred.width != truth.width || pred.height != truth.height)
        throw std::invalid_argument("surface_dice: mask dimensions differ");
    const BorderRegion bp = border_region(pred, tau);
    const BorderRegion bt = border_region(truth, tau);
    const std::int64_t total = bp.count + bt.count;
    if (total == 0)
        return 1.0;
    std::int64_t inter = 0;
    for (std::size_t i = 0; i < bp.membership.size(); ++i)
        if (bp.membership[i] && bt.membership[i])
            ++inter;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Metric selection for the evaluation and search commands.

struct MetricKind {
    enum class Kind { VolumetricDice, Jaccard, SurfaceDice, FBeta, Precision, Sensitivity };
    Kind kind = Kind::VolumetricDice;
    double tau = 1.0;  // SurfaceDice only
    double beta = 1.0; // FBeta only

    void validate() const {
        if (!(tau >= 0.0))
            throw std::domain_error("MetricKind: tau must be nonnegative");
        if (!(beta > 0.0))
            throw std::domain_error("MetricKind: beta must be positive");
    }
};

inline double evaluate_metric(const BinaryMask& pred, const BinaryMask& truth, const MetricKind& m) {
    m.validate();
    switch (m.kind) {
    case MetricKind::Kind::SurfaceDice:
        return surface_dice(pred, truth, m.tau);
    case MetricKind::Kind::VolumetricDice:
        return volumetric_dice(confusion(pred, truth));
    case MetricKind::Kind::Jaccard:
        return jaccard(confusion(pred, truth));
    case MetricKind::Kind::FBeta:
        return f_beta(confusion(pred, truth), m.beta);
    case MetricKind::Kind::Precision:
        return precision(confusion(pred, truth));
    case MetricKind::Kind::Sensitivity:
        return sensitivity(confusion(pred, truth));
    }
    throw std::invalid_argument("evaluate_metric: unknown metric");
}

inline std::string metric_name(const MetricKind& m) {
    switch (m.kind) {
    case MetricKind::Kind::VolumetricDice: return "dice";
    case MetricKind::Kind::Jaccard: return "jaccard";
    case MetricKind::Kind::SurfaceDice: return "surface-dice";
    case MetricKind::Kind::FBeta: return "fbeta";
    case MetricKind::Kind::Precision: return "precision";
    case MetricKind::Kind::Sensitivity: return "sensitivity";
    }
    return "unknown";
}

inline MetricKind metric_from_name(const std::string& name) {
    MetricKind m;
    if (name == "dice")
        m.kind = MetricKind::Kind::VolumetricDice;
    else if (name == "jaccard")
        m.kind = MetricKind::Kind::Jaccard;
    else if (name == "surface-dice")
        m.kind = MetricKind::Kind::SurfaceDice;
    else if (name == "fbeta")
        m.kind = MetricKind::Kind::FBeta;
    else if (name == "precision")
        m.kind = MetricKind::Kind::Precision;
    else if (name == "sensitivity")
        m.kind = MetricKind::Kind::Sensitivity;
    else
        throw std::invalid_argument("unknown metric name: " + name);
    return m;
}

} // namespace consenseg
