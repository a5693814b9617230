#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dispatch/collapse.hpp"
#include "dispatch/config.hpp"
#include "dispatch/transcribe.hpp"

using namespace dispatch;

static std::string scenario_path(const char* name) {
    return std::string(DISPATCH_SCENARIO_DIR) + "/" + name;
}

static const Scenario& table1() {
    static const Scenario sc = load_scenario_file(scenario_path("table1_duck.cfg"));
    return sc;
}

static const DiscreteSolution& table1_solution() {
    static const DiscreteSolution sol = solve(build(table1(), Scheme::Trapezoidal));
    return sol;
}

TEST_CASE("reconstruction inverts a synthetic constant co-state") {
    LoadClass a{"a", 0.25, 4.0, CostFunction::scaled_polynomial(1.0, 0.1, 4.0)};
    LoadClass b{"b", 0.04, 2.0, CostFunction::scaled_polynomial(1.0, 0.1, 2.0)};
    const double lam0 = -1.7;
    const int n = 32;
    std::vector<double> xa(n), xb(n);
    for (int k = 0; k < n; ++k) {
        xa[k] = a.cost.inv_d1(a.alpha * lam0);
        xb[k] = b.cost.inv_d1(b.alpha * lam0);
    }
    const auto rec = reconstruct(xa, xb, a, b);
    CHECK(rec.condition_number > 1.0);
    for (int k = 0; k < n; ++k) {
        REQUIRE(rec.lambda[k] == Catch::Approx(lam0).epsilon(1e-9));
        REQUIRE(std::abs(rec.dlambda[k]) <= 1e-9);
    }
    // recovering a source class reproduces its input
    const auto back = recover_class(rec, a);
    for (int k = 0; k < n; ++k) REQUIRE(back[k] == Catch::Approx(xa[k]).margin(1e-9));
}

TEST_CASE("equal leakage rates make the pair singular") {
    LoadClass a{"a", 0.04, 4.0, CostFunction::scaled_polynomial(1.0, 0.1, 4.0)};
    LoadClass b{"b", 0.04, 2.0, CostFunction::scaled_polynomial(1.0, 0.1, 2.0)};
    std::vector<double> x(8, 0.1);
    CHECK_THROWS_AS(reconstruct(x, x, a, b), SingularPair);
}

TEST_CASE("pool pumps recovered from ACs and fast water heaters") {
    const auto& sc = table1();
    const auto& sol = table1_solution();
    const int ia = sc.class_index("acs");
    const int ib = sc.class_index("fwh");
    const int ipp = sc.class_index("pp");
    const auto rec = reconstruct(sol.x[ia], sol.x[ib], sc.classes[ia], sc.classes[ib], ia, ib);
    const auto xpp = recover_class(rec, sc.classes[ipp]);
    double err = 0.0;
    for (int k = 1; k <= sol.steps; ++k) err = std::max(err, std::abs(xpp[k] - sol.x[ipp][k]));
    CAPTURE(err);
    CHECK(err <= 0.01 * sc.classes[ipp].capacity);

    // recovered co-state matches the solver multiplier away from the jump
    double lam_err = 0.0;
    for (int k = 1; k <= sol.steps; ++k)
        lam_err = std::max(lam_err, std::abs(rec.lambda[k] - sol.lambda_mean[k]));
    CHECK(lam_err <= 5e-2 * (1.0 + sol.max_abs_lambda()));
}

TEST_CASE("trivial scenario recovers the zero trajectory") {
    const Scenario sc = load_scenario_file(scenario_path("trivial.cfg"), 96);
    const auto sol = solve(build(sc, Scheme::Trapezoidal));
    const auto rec = reconstruct(sol.x[0], sol.x[1], sc.classes[0], sc.classes[1]);
    LoadClass ghost{"ghost", 0.1, 1.0, CostFunction::scaled_polynomial(1.0, 0.1, 1.0)};
    for (double v : recover_class(rec, ghost)) CHECK(std::abs(v) <= 1e-9);
}

TEST_CASE("source-pair independence tightens under refinement") {
    const std::string path = scenario_path("table1_duck.cfg");
    double disagree[2];
    int g = 0;
    for (const int n : {288, 576}) {
        const Scenario sc = load_scenario_file(path, n);
        const auto sol = solve(build(sc, Scheme::Trapezoidal));
        const auto r1 = reconstruct(sol.x[0], sol.x[1], sc.classes[0], sc.classes[1]);
        const auto r2 = reconstruct(sol.x[0], sol.x[3], sc.classes[0], sc.classes[3]);
        double d = 0.0;
        for (int k = 1; k <= n; ++k) d = std::max(d, std::abs(r1.lambda[k] - r2.lambda[k]));
        disagree[g++] = d;
    }
    CAPTURE(disagree[0], disagree[1]);
    CHECK(disagree[1] <= disagree[0] / 1.5);
}
