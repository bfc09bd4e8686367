#pragma once

// End-to-end segmentation pipeline (image -> particles -> DSMC -> clusters ->
// mask) and seeded random search over (delta1, delta2, sigma2). Trials are
// evaluated with independent derived RNG streams, so a trial's result depends
// only on (seed, trial index, parameters), never on the other trials.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <utility>
#include <vector>

#include "clusters.hpp"
#include "image.hpp"
#include "mask_ops.hpp"
#include "metrics.hpp"
#include "particles.hpp"
#include "rng.hpp"
#include "solver.hpp"

namespace consenseg {

struct PipelineConfig {
    double r_merge = 0.0;   // <= 0 means delta1 / 2
    double threshold = 0.5; // binarization level
    int min_fg = 10;
    int min_bg = 10;
    int connectivity = 8;

    double effective_r_merge(double delta1) const {
        return r_merge > 0.0 ? r_merge : delta1 / 2.0;
    }

    void validate() const {
        if (!(threshold > 0.0 && threshold < 1.0))
            throw std::domain_error("PipelineConfig: threshold must lie in (0,1)");
        if (min_fg < 1 || min_bg < 1)
            throw std::domain_error("PipelineConfig: component size thresholds must be positive");
        if (connectivity != 4 && connectivity != 8)
            throw std::domain_error("PipelineConfig: connectivity must be 4 or 8");
    }
};

struct SegmentationResult {
    ParticleSystem final_system;
    SimulationTrace trace;
    ClusterAssignment clusters;
    MultiLevelMask multilevel;
    BinaryMask mask; // refined binary mask
};

// Full pipeline on one image. snapshot_every <= 0 records only the initial and
// final states.
inline SegmentationResult segment_image(const GrayImage& img, const ModelParams& params,
                                        const PipelineConfig& cfg, RngStream& rng,
                                        std::int64_t snapshot_every = 0) {
    params.validate();
    cfg.validate();
    const ParticleSystem initial = system_from_image(img);
    const std::int64_t steps = params.step_count();
    if (snapshot_every <= 0)
        snapshot_every = std::max<std::int64_t>(steps, 1);

    SegmentationResult res;
    auto [final_sys, trace] = simulate(initial, params, rng, snapshot_every);
    res.final_system = std::move(final_sys);
    res.trace = std::move(trace);
    res.clusters = extract_clusters(res.final_system, cfg.effective_r_merge(params.delta1));
    res.multilevel = multilevel_mask(res.clusters, res.final_system);
    const BinaryMask raw = binarize(res.multilevel, cfg.threshold);
    res.mask = refine(raw, cfg.min_fg, cfg.min_bg, cfg.connectivity);
    return res;
}

// ---------------------------------------------------------------------------
// Random search.

struct SearchSpace {
    double delta1_lo = 0.0; // set from the image spacing by defaults_for
    double delta1_hi = 0.7;
    double delta2_lo = 0.05;
    double delta2_hi = 0.3;
    double sigma2_lo = std::exp(-5.0);
    double sigma2_hi = 1.0;

    // delta1 lower bound defaults to the horizontal pixel spacing 2/(W-1).
    static SearchSpace defaults_for(const GrayImage& img) {
        SearchSpace s;
        if (img.width < 2)
            throw std::invalid_argument("SearchSpace: image must be at least 2 pixels wide");
        s.delta1_lo = 2.0 / (img.width - 1);
        return s;
    }

    void validate() const {
        if (!(delta1_lo > 0.0 && delta1_lo < delta1_hi))
            throw std::domain_error("SearchSpace: need 0 < delta1_lo < delta1_hi");
        if (!(delta2_lo >= 0.0 && delta2_lo < delta2_hi))
            throw std::domain_error("SearchSpace: need 0 <= delta2_lo < delta2_hi");
        if (!(sigma2_lo > 0.0 && sigma2_lo < sigma2_hi))
            throw std::domain_error("SearchSpace: need 0 < sigma2_lo < sigma2_hi");
    }
};

struct SampledParams {
    double delta1 = 0.0;
    double delta2 = 0.0;
    double sigma2 = 0.0;
};

// Draw order: delta1, delta2, then sigma2 (log-uniform).
inline SampledParams sample_params(const SearchSpace& space, RngStream& rng) {
    space.validate();
    SampledParams s;
    s.delta1 = rng.uniform(space.delta1_lo, space.delta1_hi);
    s.delta2 = rng.uniform(space.delta2_lo, space.delta2_hi);
    s.sigma2 = std::exp(rng.uniform(std::log(space.sigma2_lo), std::log(space.sigma2_hi)));
    return s;
}

struct Trial {
    std::int64_t index = 0;
    double delta1 = 0.0;
    double delta2 = 0.0;
    double sigma2 = 0.0;
    double metric_value = 0.0;
    double loss_value = 1.0;
    double wall_seconds = 0.0;
    std::string error; // empty on success
};

struct OptResult {
    Trial best;
    std::vector<Trial> trials; // in trial-index order, one per iteration
    std::uint64_t seed = 0;
};

// Evaluates one parameter point. A failing pipeline (domain error, degenerate
// state) does not abort the search: the trial records worst-case loss 1 and
// the error message.
inline Trial evaluate_trial(const GrayImage& img, const BinaryMask& truth, const ModelParams& params,
                            const PipelineConfig& cfg, const MetricKind& metric, RngStream& rng) {
    Trial t;
    t.delta1 = params.delta1;
    t.delta2 = params.delta2;
    t.sigma2 = params.sigma2;
    const auto start = std::chrono::steady_clock::now();
    try {
        const SegmentationResult res = segment_image(img, params, cfg, rng);
        t.metric_value = evaluate_metric(res.mask, truth, metric);
        t.loss_value = loss(t.metric_value);
    } catch (const std::exception& e) {
        t.metric_value = 0.0;
        t.loss_value = 1.0;
        t.error = e.what();
    }
    t.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return t;
}

// Plain random search: `iterations` independent draws from the space, each
// simulated with the stream derived from (seed, trial index). Best trial is
// the lowest loss; ties keep the earliest index. The trial list always has
// exactly `iterations` entries, failures included.
inline OptResult optimize(const GrayImage& img, const BinaryMask& truth, const ModelParams& base,
                          const PipelineConfig& cfg, const MetricKind& metric,
                          const SearchSpace& space, std::int64_t iterations, std::uint64_t seed) {
    if (iterations < 1)
        throw std::invalid_argument("optimize: iterations must be positive");
    space.validate();
    cfg.validate();
    metric.validate();

    OptResult out;
    out.seed = seed;
    out.trials.reserve(static_cast<std::size_t>(iterations));
    RngStream param_rng(seed);

    for (std::int64_t i = 0; i < iterations; ++i) {
        const SampledParams s = sample_params(space, param_rng);
        ModelParams p = base;
        p.delta1 = s.delta1;
        p.delta2 = s.delta2;
        p.sigma2 = s.sigma2;
        RngStream trial_rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
        Trial t = evaluate_trial(img, truth, p, cfg, metric, trial_rng);
        t.index = i;
        out.trials.push_back(std::move(t));
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < out.trials.size(); ++i)
        if (out.trials[i].loss_value < out.trials[best].loss_value)
            best = i;
    out.best = out.trials[best];
    return out;
}

} // namespace consenseg
