#include "gcslab/schedule.hpp"

#include <doctest.h>

#include <cmath>

using namespace gcslab;

TEST_CASE("vp schedules satisfy the variance-preserving identity everywhere") {
    for (ScheduleKind kind : {ScheduleKind::VpLinear, ScheduleKind::VpCosine}) {
        NoiseSchedule sched = make_schedule(kind, 1000);
        for (int t = 0; t < sched.grid_size(); ++t) {
            double a = sched.alpha(t), s = sched.sigma(t);
            CHECK(std::abs(a * a + s * s - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("vp-linear boundary conditions") {
    NoiseSchedule sched = make_schedule("vp-linear", 1000);
    CHECK(sched.alpha(0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sched.sigma(sched.max_index()) >= 0.99);
    CHECK(sched.sigma(0) >= 0.0);
}

TEST_CASE("monotonicity of alpha, sigma, lambda") {
    for (ScheduleKind kind : {ScheduleKind::VpLinear, ScheduleKind::VpCosine}) {
        NoiseSchedule sched = make_schedule(kind, 1000);
        for (int t = 1; t < sched.grid_size(); ++t) {
            CHECK(sched.alpha(t) <= sched.alpha(t - 1));
            CHECK(sched.sigma(t) >= sched.sigma(t - 1));
            CHECK(sched.lambda(t) < sched.lambda(t - 1));
        }
    }
}

TEST_CASE("lambda matches its definition at t=500") {
    NoiseSchedule sched = make_schedule("vp-linear", 1000);
    double recomputed = std::log(sched.alpha(500) / sched.sigma(500));
    CHECK(std::abs(recomputed - sched.lambda(500)) < 1e-12);
}

TEST_CASE("make_schedule rejects degenerate grids and is deterministic") {
    CHECK_THROWS_AS(make_schedule("vp-linear", 1), std::invalid_argument);
    CHECK_THROWS_AS(make_schedule("nope", 100), std::invalid_argument);
    NoiseSchedule a = make_schedule("vp-linear", 100);
    NoiseSchedule b = make_schedule("vp-linear", 100);
    for (int t = 0; t < 100; ++t) {
        CHECK(a.alpha(t) == b.alpha(t));
        CHECK(a.sigma(t) == b.sigma(t));
    }
}

TEST_CASE("point_at_lambda inverts the grid's lambda") {
    NoiseSchedule sched = make_schedule("vp-linear", 1000);
    for (int t : {10, 200, 500, 900}) {
        SchedulePoint p = NoiseSchedule::point_at_lambda(sched.lambda(t));
        CHECK(p.alpha == doctest::Approx(sched.alpha(t)).epsilon(1e-12));
        CHECK(p.sigma == doctest::Approx(sched.sigma(t)).epsilon(1e-12));
    }
}

TEST_CASE("add_noise matches the reparameterization") {
    NoiseSchedule sched = make_schedule("vp-linear", 1000);
    Rng rng(11);
    Vec x0 = rng.normal_vec(8), eps = rng.normal_vec(8);

    SUBCASE("identity at t=0 up to the sigma floor") {
        Vec out = add_noise(sched, x0, 0, eps);
        CHECK((out - x0).norm() < 2e-6 * (1.0 + eps.norm()));
    }
    SUBCASE("linearity in x0 and eps") {
        Vec zero = Vec::Zero(8);
        CHECK((add_noise(sched, zero, 300, eps) - sched.sigma(300) * eps).norm() == 0.0);
        CHECK((add_noise(sched, x0, 300, zero) - sched.alpha(300) * x0).norm() == 0.0);
    }
    SUBCASE("affine combination identity") {
        Vec y0 = rng.normal_vec(8);
        double a = 0.7, b = -1.3;
        int t = 412;
        Vec lhs = add_noise(sched, a * x0 + b * y0, t, eps);
        Vec rhs = a * add_noise(sched, x0, t, eps) + b * add_noise(sched, y0, t, eps) -
                  (a + b - 1.0) * sched.sigma(t) * eps;
        CHECK((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
    }
    SUBCASE("shape mismatch rejected") {
        CHECK_THROWS_AS(add_noise(sched, x0, 10, rng.normal_vec(7)), std::invalid_argument);
    }
}

TEST_CASE("warmup upper bound is piecewise linear") {
    TimestepSampler sampler;
    CHECK(sampler.upper_bound(0) == doctest::Approx(980.0));
    CHECK(sampler.upper_bound(750) == doctest::Approx(740.0));
    CHECK(sampler.upper_bound(1500) == doctest::Approx(500.0));
    CHECK(sampler.upper_bound(5000) == doctest::Approx(500.0));
}

TEST_CASE("sampled timesteps respect the documented ranges") {
    Rng rng(3);
    SUBCASE("epoch 0 keeps t in [20, 980]") {
        for (int i = 0; i < 2000; ++i) {
            TimestepTriple tr = sample_timesteps(rng, 0, 100);
            CHECK(tr.t >= 20);
            CHECK(tr.t <= 980);
        }
    }
    SUBCASE("epoch 1500 keeps t in [20, 500]") {
        for (int i = 0; i < 2000; ++i) {
            TimestepTriple tr = sample_timesteps(rng, 1500, 100);
            CHECK(tr.t >= 20);
            CHECK(tr.t <= 500);
        }
    }
    SUBCASE("s and e windows for t=300, delta=100") {
        for (int i = 0; i < 2000; ++i) {
            TimestepTriple tr = sample_timesteps(rng, 0, 100);
            if (tr.t != 300) continue;
            CHECK(tr.s == 200);
            CHECK(tr.e >= 100);
            CHECK(tr.e <= 190);
        }
    }
}

TEST_CASE("triple ordering holds for 10^4 samples at varied epochs") {
    Rng rng(9);
    for (int epoch : {0, 100, 750, 1500, 5000}) {
        for (int i = 0; i < 2000; ++i) {
            TimestepTriple tr = sample_timesteps(rng, epoch, 100);
            CHECK(tr.t > tr.s);
            CHECK(tr.s > tr.e);
            CHECK(tr.e >= 0);
        }
    }
}

TEST_CASE("sampler rejects bad arguments") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_timesteps(rng, -1, 100), std::invalid_argument);
    CHECK_THROWS_AS(sample_timesteps(rng, 0, 5), std::invalid_argument);
}
