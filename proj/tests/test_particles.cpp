#include <catch2/catch_amalgamated.hpp>

#include <consenseg/image.hpp>
#include <consenseg/particles.hpp>
#include <consenseg/rng.hpp>

#include <cmath>
#include <stdexcept>

using namespace consenseg;

namespace {

GrayImage constant_image(std::int32_t w, std::int32_t h, double v) {
    GrayImage img;
    img.width = w;
    img.height = h;
    img.values.assign(static_cast<std::size_t>(w) * h, v);
    return img;
}

} // namespace

TEST_CASE("image to particles maps pixel centers onto [-1,1]^2") {
    SECTION("3x3 center pixel lands at the origin") {
        auto img = constant_image(3, 3, 0.5);
        const ParticleSystem sys = system_from_image(img);
        REQUIRE(sys.size() == 9);
        const Particle& center = sys.particles[4];
        CHECK(center.row == 1);
        CHECK(center.col == 1);
        CHECK(center.position.x == 0.0);
        CHECK(center.position.y == 0.0);
    }

    SECTION("2x2 pixels sit exactly on the corners") {
        auto img = constant_image(2, 2, 0.5);
        const ParticleSystem sys = system_from_image(img);
        REQUIRE(sys.size() == 4);
        CHECK(sys.particles[0].position.x == -1.0);
        CHECK(sys.particles[0].position.y == -1.0);
        CHECK(sys.particles[1].position.x == 1.0);
        CHECK(sys.particles[1].position.y == -1.0);
        CHECK(sys.particles[2].position.x == -1.0);
        CHECK(sys.particles[2].position.y == 1.0);
        CHECK(sys.particles[3].position.x == 1.0);
        CHECK(sys.particles[3].position.y == 1.0);
    }

    SECTION("256x256 gives 65536 particles with spacing 2/255") {
        auto img = constant_image(256, 256, 0.25);
        const ParticleSystem sys = system_from_image(img);
        REQUIRE(sys.size() == 65536u);
        const double dx = sys.particles[1].position.x - sys.particles[0].position.x;
        CHECK(dx == Catch::Approx(2.0 / 255.0).epsilon(0).margin(1e-15));
        const double dy = sys.particles[256].position.y - sys.particles[0].position.y;
        CHECK(dy == Catch::Approx(2.0 / 255.0).epsilon(0).margin(1e-15));
    }

    SECTION("particle order is row-major and features copy the gray values") {
        GrayImage img = constant_image(3, 2, 0.0);
        for (std::size_t i = 0; i < img.values.size(); ++i)
            img.values[i] = static_cast<double>(i) / 10.0;
        const ParticleSystem sys = system_from_image(img);
        for (std::size_t i = 0; i < sys.size(); ++i) {
            CHECK(sys.particles[i].feature == img.values[i]);
            CHECK(sys.particles[i].row == static_cast<std::int32_t>(i / 3));
            CHECK(sys.particles[i].col == static_cast<std::int32_t>(i % 3));
        }
    }

    SECTION("images narrower than 2 pixels are rejected") {
        auto thin = constant_image(1, 5, 0.5);
        CHECK_THROWS_AS(system_from_image(thin), std::invalid_argument);
        auto flat = constant_image(5, 1, 0.5);
        CHECK_THROWS_AS(system_from_image(flat), std::invalid_argument);
    }
}

TEST_CASE("interaction kernel gates on both distances, inclusively") {
    ModelParams p;
    p.delta1 = 0.5;
    p.delta2 = 0.1;

    Vec2 xa{0.0, 0.0};
    Vec2 xb{0.0, 0.0};
    double ca = 0.5;
    double cb = 0.5;

    SECTION("identical particles always interact") {
        CHECK(interaction_fires(xa, xb, ca, cb, p));
    }

    SECTION("spatial bound is inclusive at exactly delta1") {
        xb = {0.5, 0.0};
        CHECK(interaction_fires(xa, xb, ca, cb, p));
        xb = {0.75, 0.0}; // 1.5 * delta1
        CHECK_FALSE(interaction_fires(xa, xb, ca, cb, p));
    }

    SECTION("feature bound is inclusive at exactly delta2") {
        p.delta2 = 0.25; // representable exactly, as is |0.75 - 0.5|
        cb = 0.75;
        CHECK(interaction_fires(xa, xb, ca, cb, p));
        cb = std::nextafter(0.75, 1.0);
        CHECK_FALSE(interaction_fires(xa, xb, ca, cb, p));
    }

    SECTION("kernel is symmetric") {
        RngStream rng(5);
        for (int i = 0; i < 200; ++i) {
            xa = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
            xb = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
            ca = rng.uniform01();
            cb = rng.uniform01();
            CHECK(interaction_fires(xa, xb, ca, cb, p) == interaction_fires(xb, xa, cb, ca, p));
        }
    }
}

TEST_CASE("diffusion functions match their closed forms") {
    SECTION("all four vanish at the endpoints and peak value is 0.25 at c=0.5") {
        for (auto kind : {DiffusionKind::D1, DiffusionKind::D2, DiffusionKind::D3,
                          DiffusionKind::D4}) {
            CHECK(diffusion_value(kind, 0.0) == 0.0);
            CHECK(diffusion_value(kind, 1.0) == 0.0);
            CHECK(diffusion_value(kind, 0.5) == 0.25);
        }
        CHECK(diffusion_value(DiffusionKind::Constant, 0.3) == 1.0);
    }

    SECTION("spot values away from the symmetric point") {
        CHECK(diffusion_value(DiffusionKind::D1, 0.2) == Catch::Approx(0.16).margin(1e-15));
        CHECK(diffusion_value(DiffusionKind::D2, 0.2) == Catch::Approx(0.1024).margin(1e-15));
        CHECK(diffusion_value(DiffusionKind::D3, 0.2) == Catch::Approx(0.1).margin(1e-15));
        CHECK(diffusion_value(DiffusionKind::D3, 0.8) == Catch::Approx(0.08).margin(1e-15));
        CHECK(diffusion_value(DiffusionKind::D4, 0.2) ==
              Catch::Approx(64.0 * std::pow(0.2, 4) * std::pow(0.8, 4)).margin(1e-15));
    }

    SECTION("D3 takes the left branch exactly at 0.5 and drops beyond it") {
        CHECK(diffusion_value(DiffusionKind::D3, 0.5) == 0.25);
        const double just_right = std::nextafter(0.5, 1.0);
        CHECK(diffusion_value(DiffusionKind::D3, just_right) < 0.13);
    }

    SECTION("grid sweep: nonnegative, bounded by the c=0.5 peak") {
        for (auto kind : {DiffusionKind::D1, DiffusionKind::D2, DiffusionKind::D3,
                          DiffusionKind::D4}) {
            const double peak = diffusion_value(kind, 0.5);
            for (int i = 0; i <= 10000; ++i) {
                const double c = static_cast<double>(i) / 10000.0;
                const double d = diffusion_value(kind, c);
                REQUIRE(d >= 0.0);
                REQUIRE(d <= peak);
            }
        }
    }

    SECTION("values outside [0,1] are a domain error") {
        CHECK_THROWS_AS(diffusion_value(DiffusionKind::D1, -0.01), std::domain_error);
        CHECK_THROWS_AS(diffusion_value(DiffusionKind::D4, 1.01), std::domain_error);
    }
}

TEST_CASE("model parameter validation") {
    ModelParams p;
    CHECK_NOTHROW(p.validate());

    SECTION("negative radii rejected") {
        p.delta1 = -0.1;
        CHECK_THROWS_AS(p.validate(), std::domain_error);
    }
    SECTION("epsilon outside (0,1) rejected") {
        p.epsilon = 0.0;
        CHECK_THROWS_AS(p.validate(), std::domain_error);
        p.epsilon = 1.0;
        CHECK_THROWS_AS(p.validate(), std::domain_error);
    }
    SECTION("horizon must be a whole number of steps") {
        p.epsilon = 0.01;
        p.horizon = 0.015;
        CHECK_THROWS_AS(p.validate(), std::domain_error);
        p.horizon = 0.02;
        CHECK_NOTHROW(p.validate());
    }
    SECTION("step count rounds the horizon") {
        p.epsilon = 0.01;
        p.horizon = 50.0;
        CHECK(p.step_count() == 5000);
    }
}
