#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "dispatch/config.hpp"
#include "dispatch/net_load.hpp"
#include "dispatch/scenario.hpp"

using namespace dispatch;

static std::string scenario_path(const char* name) {
    return std::string(DISPATCH_SCENARIO_DIR) + "/" + name;
}

TEST_CASE("table-one config parses into the five-class fleet") {
    const Scenario sc = load_scenario_file(scenario_path("table1_duck.cfg"));
    REQUIRE(sc.num_classes() == 5);
    const double alphas[] = {0.25, 0.04, 0.01, 0.10, 0.004};
    const double caps[] = {4.0, 2.0, 5.0, 0.5, 2.0};
    for (int i = 0; i < 5; ++i) {
        CHECK(sc.classes[i].alpha == alphas[i]);
        CHECK(sc.classes[i].capacity == caps[i]);
    }
    CHECK(sc.classes[0].name == "acs");
    CHECK(sc.classes[4].name == "pp");
    // pool pumps keep the quadratic cost: kappa1 = 0, kappa2 = 1
    const auto* pp = sc.classes[4].cost.as_polynomial();
    REQUIRE(pp != nullptr);
    CHECK(pp->kappa1 == 0.0);
    CHECK(pp->kappa2 == 1.0);
    CHECK(sc.grid.steps == 576);
    // generation cost centered on the mean net load
    CHECK(sc.generation.cost_g.center() == Catch::Approx(sc.net_load.mean));
}

TEST_CASE("minimal single-class config and validation failures") {
    const char* base = R"(
[grid]
horizon_hours = 24.0
steps = 48
[[class]]
name = "only"
alpha = 0.1
capacity = {CAP}
cost.kind = "poly8"
[netload]
kind = "constant"
level_gw = 10.0
)";
    auto with_cap = [&](const char* cap) {
        std::string text(base);
        text.replace(text.find("{CAP}"), 5, cap);
        return text;
    };
    const Scenario sc = load_scenario(with_cap("2.0"));
    CHECK(sc.num_classes() == 1);
    CHECK(sc.x0[0] == 0.0);
    CHECK_THROWS_AS(load_scenario(with_cap("0.0")), ValidationError);
    CHECK_THROWS_AS(load_scenario("not a config"), ParseError);
    CHECK_THROWS_AS(load_scenario(with_cap("2.0"), {}, 1), ValidationError);  // N < 2
}

TEST_CASE("initial-condition arrays must match the class count") {
    const char* text = R"(
[grid]
steps = 32
[[class]]
name = "a"
alpha = 0.1
capacity = 2.0
[initial]
x0 = [1.0, 2.0]
[netload]
kind = "constant"
level_gw = 5.0
)";
    CHECK_THROWS_AS(load_scenario(text), ValidationError);
}

TEST_CASE("duck curve is deterministic with the prescribed swing") {
    TimeGrid grid{24.0, 576};
    const auto a = synth_duck_curve(grid, 30.0, 40.0, 7);
    const auto b = synth_duck_curve(grid, 30.0, 40.0, 7);
    CHECK(a.values == b.values);
    CHECK(a.peak() - a.trough() == Catch::Approx(40.0).margin(1e-6));

    const auto c = synth_duck_curve(grid, 30.0, 40.0, 8);
    CHECK(c.values != a.values);

    const auto flat = synth_duck_curve(grid, 25.0, 0.0, 1);
    for (double v : flat.values) CHECK(v == Catch::Approx(25.0).margin(1e-12));

    // stored mean matches the trapezoid average
    CHECK(detail::trapezoid_mean(a.values) == Catch::Approx(a.mean).margin(1e-9));

    // continuity: value and first-difference jumps bounded by the slope scale
    double max_slope = 0.0;
    for (double d : a.derivative) max_slope = std::max(max_slope, std::abs(d));
    const double h = grid.h();
    for (std::size_t k = 0; k + 1 < a.values.size(); ++k)
        REQUIRE(std::abs(a.values[k + 1] - a.values[k]) <= 3.0 * h * max_slope);
}

TEST_CASE("duck trough sits midday and the peak in the evening") {
    TimeGrid grid{24.0, 576};
    const auto load = synth_duck_curve(grid, 30.0, 40.0, 7);
    const auto lo =
        std::min_element(load.values.begin(), load.values.end()) - load.values.begin();
    const auto hi =
        std::max_element(load.values.begin(), load.values.end()) - load.values.begin();
    const double t_lo = grid.t(static_cast<int>(lo));
    const double t_hi = grid.t(static_cast<int>(hi));
    CHECK((t_lo > 10.0 && t_lo < 16.0));
    CHECK((t_hi > 17.0 && t_hi < 22.0));
}

TEST_CASE("piecewise-constant load smooths each edge over one interval") {
    TimeGrid grid{24.0, 576};
    const auto one = piecewise_constant_load(grid, {{0.0, 30.0}});
    for (double v : one.values) CHECK(v == 30.0);

    const auto step = piecewise_constant_load(grid, {{0.0, 30.0}, {18.0, 70.0}});
    CHECK(step.peak() - step.trough() == Catch::Approx(40.0));
    CHECK(step.values.front() == 30.0);
    CHECK(step.values.back() == 70.0);
    int transition = 0;
    for (std::size_t k = 0; k + 1 < step.values.size(); ++k)
        if (step.values[k] != step.values[k + 1]) ++transition;
    CHECK(transition == 1);  // exactly one climbing interval

    const auto degenerate = piecewise_constant_load(grid, {{0.0, 30.0}, {12.0, 30.0}});
    for (double v : degenerate.values) CHECK(v == 30.0);

    CHECK_THROWS_AS(piecewise_constant_load(grid, {{0.0, 30.0}, {18.0, 70.0}, {6.0, 50.0}}),
                    ValidationError);
    CHECK_THROWS_AS(piecewise_constant_load(grid, {{1.0, 30.0}}), ValidationError);
}

TEST_CASE("net-load csv ingestion resamples to the grid") {
    TimeGrid grid{24.0, 48};
    std::ostringstream csv;
    csv << "t_hours,load_gw\n";
    for (int i = 0; i <= 12; ++i) csv << (2.0 * i) << "," << (20.0 + i) << "\n";
    const auto load = load_csv(grid, csv.str());
    CHECK(load.values.front() == Catch::Approx(20.0));
    CHECK(load.values.back() == Catch::Approx(32.0));
    CHECK(load.values[24] == Catch::Approx(26.0));  // t = 12h
    // derivative filled by central differences: slope 0.5 GW/h
    CHECK(load.derivative[24] == Catch::Approx(0.5).margin(1e-9));

    CHECK_THROWS_AS(load_csv(grid, "bogus\n1,2\n"), ParseError);
    CHECK_THROWS_AS(load_csv(grid, "t_hours,load_gw\n5,1\n3,2\n"), ParseError);

    std::ostringstream csvd;
    csvd << "t_hours,load_gw,dload_gw_per_h\n0,10,1\n24,34,1\n";
    const auto with_d = load_csv(grid, csvd.str());
    CHECK(with_d.derivative[10] == Catch::Approx(1.0));
}
