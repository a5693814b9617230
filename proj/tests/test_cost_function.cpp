#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dispatch/cost_function.hpp"
#include "support/oracles.hpp"

using dispatch::BracketFailure;
using dispatch::CostFunction;

TEST_CASE("quadratic cost evaluates and differentiates in closed form") {
    const auto c = CostFunction::quadratic(1.0, 0.0);
    CHECK(c.eval(2.0) == 4.0);
    CHECK(c.d1(3.0) == 6.0);
    CHECK(c.d2(-1.0) == 2.0);
    CHECK(c.inv_d1(4.0) == 2.0);

    const auto cg = CostFunction::quadratic(0.7, 31.5);
    CHECK(cg.d1(32.5) == Catch::Approx(2.0 * 0.7 * 1.0));
    CHECK(cg.inv_d1(0.0) == Catch::Approx(31.5));  // m = 0 returns the center
}

TEST_CASE("scaled polynomial matches its closed forms") {
    const auto c = CostFunction::scaled_polynomial(1.0, 0.1, 4.0);
    CHECK(c.eval(0.0) == 0.0);
    CHECK(c.eval(4.0) == Catch::Approx(1.1).epsilon(1e-14));  // kappa1 + kappa2 at v/C = 1
    CHECK(c.d1(0.0) == 0.0);

    // d2 at the origin against the finite-difference oracle on d1
    const double fd = oracles::central_diff([&](double v) { return c.d1(v); }, 0.0, 1e-5);
    CHECK(c.d2(0.0) == Catch::Approx(0.0125).epsilon(1e-9));
    CHECK(c.d2(0.0) == Catch::Approx(fd).epsilon(1e-7));
    CHECK(c.convexity_mu() == Catch::Approx(2.0 * 0.1 / 16.0));
}

TEST_CASE("inv_d1 agrees with the bisection oracle for the degree-7 slope") {
    const auto c = CostFunction::scaled_polynomial(1.0, 0.1, 4.0);
    const double target = 0.1;
    const double root =
        oracles::bisect([&](double v) { return c.d1(v) - target; }, 0.0, 40.0, 1e-14);
    const double got = c.inv_d1(target);
    CHECK(got == Catch::Approx(root).epsilon(1e-10));
    CHECK(got == Catch::Approx(2.4731686805497083).epsilon(1e-10));  // frozen from the oracle
    CHECK(std::abs(c.d1(got) - target) <= 1e-12 * (1.0 + target));
}

TEST_CASE("inv_d1 round trip, derivative consistency and monotonicity") {
    std::mt19937_64 rng(1234);
    const CostFunction cases[] = {
        CostFunction::quadratic(1.0, 0.0),
        CostFunction::quadratic(0.25, 2.0),
        CostFunction::scaled_polynomial(1.0, 0.1, 4.0),
        CostFunction::scaled_polynomial(0.0, 1.0, 2.0),  // pool-pump quadratic
        CostFunction::scaled_polynomial(1.0, 0.1, 0.5),
    };
    for (const auto& c : cases) {
        const double C = c.as_polynomial() ? c.as_polynomial()->capacity : 4.0;
        std::uniform_real_distribution<double> dist(-2.0 * C, 2.0 * C);
        double prev_v = -3.0 * C, prev_d = c.d1(prev_v);
        for (int s = 0; s < 1000; ++s) {
            const double v = dist(rng);
            const double m = c.d1(v);
            const double back = c.inv_d1(m);
            REQUIRE(std::abs(back - v) <= 1e-9 * (1.0 + std::abs(v)));
            const double h = 1e-6 * (1.0 + std::abs(v));
            const double fd1 = oracles::central_diff([&](double t) { return c.eval(t); }, v, h);
            const double fd2 = oracles::central_diff([&](double t) { return c.d1(t); }, v, h);
            REQUIRE(std::abs(c.d1(v) - fd1) <= 1e-5 * (1.0 + std::abs(fd1)));
            REQUIRE(std::abs(c.d2(v) - fd2) <= 1e-5 * (1.0 + std::abs(fd2)));
            REQUIRE(c.d2(v) >= 0.0);
        }
        for (int s = 0; s < 200; ++s) {
            const double v = prev_v + 0.03 * C;
            REQUIRE(c.d1(v) > prev_d);
            prev_v = v;
            prev_d = c.d1(v);
        }
    }
}

TEST_CASE("inv_d1 signals a bracket failure on degenerate configs") {
    CHECK_THROWS_AS(CostFunction::scaled_polynomial(0.0, 0.0, 4.0).inv_d1(0.5), BracketFailure);
    CHECK_THROWS_AS(CostFunction::quadratic(0.0).inv_d1(0.5), BracketFailure);
    // slope demand beyond the 10x capacity window
    const auto c = CostFunction::scaled_polynomial(0.0, 1e-6, 1.0);
    CHECK_THROWS_AS(c.inv_d1(1.0), BracketFailure);
    CHECK_NOTHROW(c.inv_d1(1.0, 1e7));  // a wider window finds it
}
