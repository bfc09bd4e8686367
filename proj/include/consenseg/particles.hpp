#pragma once

// Pixel-to-particle mapping and the interaction model. Each pixel becomes a
// particle with an immutable feature (its normalized gray value) and a position
// on [-1,1]^2; pairwise interactions fire only inside a spatial radius delta1
// and a feature radius delta2, and diffusion strength is a function of the
// feature alone.

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "image.hpp"

namespace consenseg {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double norm2(Vec2 v) { return v.x * v.x + v.y * v.y; }

struct Particle {
    Vec2 position;
    double feature = 0.0;   // never changed by the dynamics
    std::int32_t row = 0;   // origin pixel
    std::int32_t col = 0;
};

struct ParticleSystem {
    std::vector<Particle> particles;
    int width = 0;  // origin raster dimensions
    int height = 0;

    std::size_t size() const { return particles.size(); }
};

enum class DiffusionKind { D1, D2, D3, D4, Constant };

struct ModelParams {
    double delta1 = 0.5;    // spatial interaction radius
    double delta2 = 0.1;    // feature interaction radius
    double sigma2 = 0.0;    // diffusion scale
    DiffusionKind diffusion = DiffusionKind::D1;
    double epsilon = 0.01;  // time step
    double horizon = 100.0; // total simulated time T

    // Number of steps; horizon must be an integer multiple of epsilon.
    std::int64_t step_count() const {
        return std::llround(horizon / epsilon);
    }

    void validate() const {
        if (!(delta1 >= 0.0) || !(delta2 >= 0.0))
            throw std::domain_error("ModelParams: interaction radii must be nonnegative");
        if (!(sigma2 >= 0.0))
            throw std::domain_error("ModelParams: sigma2 must be nonnegative");
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw std::domain_error("ModelParams: epsilon must lie in (0,1)");
        if (!(horizon >= 0.0))
            throw std::domain_error("ModelParams: horizon must be nonnegative");
        const double steps = horizon / epsilon;
        if (std::fabs(steps - std::llround(steps)) > 1e-9 * std::max(1.0, steps))
            throw std::domain_error("ModelParams: horizon must be an integer multiple of epsilon");
    }
};

// One particle per pixel, row-major. Pixel (row, col) sits at
// (-1 + 2*col/(W-1), -1 + 2*row/(H-1)); its feature is the gray value.
// Non-square images scale each axis independently.
inline ParticleSystem system_from_image(const GrayImage& img) {
    if (img.width < 2 || img.height < 2)
        throw std::invalid_argument("system_from_image: image must be at least 2x2");
    ParticleSystem sys;
    sys.width = img.width;
    sys.height = img.height;
    sys.particles.reserve(img.size());
    const double sx = 2.0 / (img.width - 1);
    const double sy = 2.0 / (img.height - 1);
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            Particle p;
            p.position = {-1.0 + sx * c, -1.0 + sy * r};
            p.feature = img.at(r, c);
            p.row = r;
            p.col = c;
            sys.particles.push_back(p);
        }
    }
    return sys;
}

// Indicator kernel: both the Euclidean position distance and the feature
// distance must be within their radii (inclusive bounds on both).
inline bool interaction_fires(const Vec2& xi, const Vec2& xj, double ci, double cj,
                              const ModelParams& params) {
    if (norm2(xi - xj) > params.delta1 * params.delta1)
        return false;
    return std::fabs(ci - cj) <= params.delta2;
}

// Feature-dependent diffusion profiles. All vanish at c=0 and c=1 except the
// Constant kind (feature-free mode). D3 is intentionally discontinuous at 0.5;
// the c <= 0.5 branch applies at the midpoint.
inline double diffusion_value(DiffusionKind kind, double c) {
    if (!(c >= 0.0 && c <= 1.0))
        throw std::domain_error("diffusion_value: feature outside [0,1]");
    switch (kind) {
    case DiffusionKind::D1:
        return c * (1.0 - c);
    case DiffusionKind::D2: {
        const double t = c * (1.0 - c);
        return 4.0 * t * t;
    }
    case DiffusionKind::D3:
        return (c <= 0.5) ? 0.5 * c : 0.5 * c * (1.0 - c);
    case DiffusionKind::D4: {
        const double t = c * (1.0 - c);
        const double t2 = t * t;
        return 64.0 * t2 * t2;
    }
    case DiffusionKind::Constant:
        return 1.0;
    }
    throw std::invalid_argument("diffusion_value: unknown kind");
}

} // namespace consenseg
