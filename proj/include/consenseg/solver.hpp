#pragma once

// Direct simulation Monte Carlo time stepping. Each step draws a random
// permutation of the particles, consumes them two at a time as disjoint
// interaction pairs, and applies the binary consensus rule with feature-scaled
// diffusion noise. Cost is O(N) per step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "particles.hpp"
#include "rng.hpp"

namespace consenseg {

// Compensated (Neumaier) summation; keeps per-step conservation checks well
// below the tolerances they are tested against.
inline double neumaier_sum(const double* data, std::size_t n) {
    long double acc = 0.0L, comp = 0.0L;
    for (std::size_t i = 0; i < n; ++i) {
        const long double v = data[i];
        const long double t = acc + v;
        if (std::fabs((double)acc) >= std::fabs((double)v))
            comp += (acc - t) + v;
        else
            comp += (v - t) + acc;
        acc = t;
    }
    return static_cast<double>(acc + comp);
}

inline Vec2 mean_position(const std::vector<Particle>& particles) {
    if (particles.empty())
        return {0.0, 0.0};
    long double sx = 0.0L, sy = 0.0L;
    for (const Particle& p : particles) {
        sx += p.position.x;
        sy += p.position.y;
    }
    const auto n = static_cast<long double>(particles.size());
    return {static_cast<double>(sx / n), static_cast<double>(sy / n)};
}

// Spread energy sum |x - mean|^2 about the given center.
inline double spread_energy(const std::vector<Particle>& particles, Vec2 center) {
    long double acc = 0.0L, comp = 0.0L;
    for (const Particle& p : particles) {
        const long double dx = p.position.x - center.x;
        const long double dy = p.position.y - center.y;
        const long double v = dx * dx + dy * dy;
        const long double t = acc + v;
        if (acc >= v)
            comp += (acc - t) + v;
        else
            comp += (v - t) + acc;
        acc = t;
    }
    return static_cast<double>(acc + comp);
}

// Stochastic rounding: floor(x) + 1 with probability frac(x). Consumes exactly
// one uniform draw, also when x is integral.
inline std::int64_t sround(double x, RngStream& rng) {
    if (!(x >= 0.0))
        throw std::domain_error("sround: x must be nonnegative");
    const double fl = std::floor(x);
    const double frac = x - fl;
    const double u = rng.uniform01();
    return static_cast<std::int64_t>(fl) + (u < frac ? 1 : 0);
}

// Per-particle noise increment for one interaction; each component is centered
// Gaussian with variance epsilon.
struct NoiseDraw {
    Vec2 eta;
};

inline NoiseDraw sample_noise(RngStream& rng, double epsilon) {
    const double s = std::sqrt(epsilon);
    const double gx = rng.gaussian();
    const double gy = rng.gaussian();
    return {{s * gx, s * gy}};
}

// One binary interaction. Positions move toward each other by epsilon times
// the gap when the kernel fires, then receive sqrt(2*sigma2*D(c)) * eta noise
// (noise is applied whether or not the kernel fired). Features never change.
// For a firing pair the partner position is computed as (x + x*) - x', which
// keeps the pair sum bitwise unchanged when sigma2 = 0.
inline std::pair<Particle, Particle> binary_interaction(const Particle& pi, const Particle& pj,
                                                        const ModelParams& params,
                                                        const NoiseDraw& noise_i,
                                                        const NoiseDraw& noise_j) {
    Particle qi = pi;
    Particle qj = pj;
    if (interaction_fires(pi.position, pj.position, pi.feature, pj.feature, params)) {
        const double sx = pi.position.x + pj.position.x;
        const double sy = pi.position.y + pj.position.y;
        qi.position.x = pi.position.x + params.epsilon * (pj.position.x - pi.position.x);
        qi.position.y = pi.position.y + params.epsilon * (pj.position.y - pi.position.y);
        qj.position.x = sx - qi.position.x;
        qj.position.y = sy - qi.position.y;
    }
    if (params.sigma2 > 0.0) {
        const double ai = std::sqrt(2.0 * params.sigma2 * diffusion_value(params.diffusion, pi.feature));
        const double aj = std::sqrt(2.0 * params.sigma2 * diffusion_value(params.diffusion, pj.feature));
        if (ai > 0.0) {
            qi.position.x += ai * noise_i.eta.x;
            qi.position.y += ai * noise_i.eta.y;
        }
        if (aj > 0.0) {
            qj.position.x += aj * noise_j.eta.x;
            qj.position.y += aj * noise_j.eta.y;
        }
    }
    return {qi, qj};
}

// Pair selection for one step: a full Fisher-Yates permutation consumed two
// indices at a time. The pair count is Sround(N/2) (draw consumed first),
// capped at floor(N/2) so pairs stay disjoint; at most one particle (odd N)
// is left out.
struct StepPairs {
    std::vector<std::uint32_t> order;
    std::size_t pair_count = 0;
};

inline StepPairs make_step_pairs(std::size_t n, RngStream& rng) {
    if (n < 2)
        throw std::invalid_argument("make_step_pairs: need at least two particles");
    StepPairs sp;
    const std::int64_t raw = sround(static_cast<double>(n) / 2.0, rng);
    sp.pair_count = std::min<std::size_t>(static_cast<std::size_t>(raw), n / 2);
    sp.order.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        sp.order[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::uint64_t j = rng.bounded(i + 1);
        std::swap(sp.order[i], sp.order[j]);
    }
    return sp;
}

// Advances the system by one step in place.
//
// RNG consumption order per step: one uniform for Sround, N-1 bounded draws
// for the shuffle, then per pair (in pair order) eta_i then eta_j, each two
// Gaussians. When sigma2 = 0 the noise amplitude is exactly zero and no
// Gaussian draws are consumed.
inline void dsmc_step_inplace(ParticleSystem& sys, const ModelParams& params, RngStream& rng) {
    const std::size_t n = sys.size();
    const StepPairs sp = make_step_pairs(n, rng);
    const bool with_noise = params.sigma2 > 0.0;
    const NoiseDraw zero{};
    for (std::size_t k = 0; k < sp.pair_count; ++k) {
        Particle& pi = sys.particles[sp.order[2 * k]];
        Particle& pj = sys.particles[sp.order[2 * k + 1]];
        NoiseDraw ni = zero, nj = zero;
        if (with_noise) {
            ni = sample_noise(rng, params.epsilon);
            nj = sample_noise(rng, params.epsilon);
        }
        auto [qi, qj] = binary_interaction(pi, pj, params, ni, nj);
        pi = qi;
        pj = qj;
    }
}

inline ParticleSystem dsmc_step(const ParticleSystem& sys, const ModelParams& params, RngStream& rng) {
    ParticleSystem next = sys;
    dsmc_step_inplace(next, params, rng);
    return next;
}

struct Snapshot {
    double time = 0.0;
    std::vector<Vec2> positions;
    Vec2 mean;
    double energy = 0.0; // sum |x - mean|^2 at snapshot time
};

struct SimulationTrace {
    std::vector<Snapshot> snapshots;
};

namespace detail {
inline void record_snapshot(SimulationTrace& trace, const ParticleSystem& sys, double time) {
    Snapshot s;
    s.time = time;
    s.positions.reserve(sys.size());
    for (const Particle& p : sys.particles)
        s.positions.push_back(p.position);
    s.mean = mean_position(sys.particles);
    s.energy = spread_energy(sys.particles, s.mean);
    trace.snapshots.push_back(std::move(s));
}
} // namespace detail

// Runs round(T/epsilon) steps. The trace records the initial state, every
// snapshot_every-th step, and the final state; snapshot times are strictly
// increasing and bounded by the horizon.
inline std::pair<ParticleSystem, SimulationTrace> simulate(const ParticleSystem& sys,
                                                           const ModelParams& params,
                                                           RngStream& rng,
                                                           std::int64_t snapshot_every) {
    params.validate();
    if (snapshot_every < 1)
        throw std::invalid_argument("simulate: snapshot_every must be positive");
    if (sys.size() < 2)
        throw std::invalid_argument("simulate: need at least two particles");

    ParticleSystem state = sys;
    SimulationTrace trace;
    const std::int64_t steps = params.step_count();
    detail::record_snapshot(trace, state, 0.0);
    for (std::int64_t t = 1; t <= steps; ++t) {
        dsmc_step_inplace(state, params, rng);
        if (t % snapshot_every == 0 || t == steps) {
            const double time = (t == steps) ? params.horizon : t * params.epsilon;
            detail::record_snapshot(trace, state, time);
        }
    }
    return {std::move(state), std::move(trace)};
}

// Synthetic initial condition: n particles uniform on [-1,1]^2 with uniform
// features in [0,1]. Draw order per particle: x, y, feature.
inline ParticleSystem random_uniform_system(std::size_t n, RngStream& rng) {
    if (n < 2)
        throw std::invalid_argument("random_uniform_system: need at least two particles");
    ParticleSystem sys;
    sys.width = static_cast<int>(n);
    sys.height = 1;
    sys.particles.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        Particle p;
        p.position.x = -1.0 + 2.0 * rng.uniform01();
        p.position.y = -1.0 + 2.0 * rng.uniform01();
        p.feature = rng.uniform01();
        p.row = 0;
        p.col = static_cast<std::int32_t>(k);
        sys.particles.push_back(p);
    }
    return sys;
}

} // namespace consenseg
