#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dispatch/cost_function.hpp"
#include "dispatch/errors.hpp"
#include "dispatch/net_load.hpp"

namespace dispatch {

/// One homogeneous population of flexible loads, modelled as a leaky battery.
struct LoadClass {
    std::string name;
    double alpha = 0.0;      // SoC leakage, 1/hour
    double capacity = 1.0;   // GWh
    CostFunction cost;       // cost on SoC x_i (GWh)
};

struct GenerationModel {
    CostFunction cost_g;       // cost on g (GW); quadratic about the mean net load
    double ramp_kappa = 1.0;   // kappa in kappa * gamma^2
};

/// Immutable problem instance: fleet, generation, net load, initial condition.
struct Scenario {
    std::vector<LoadClass> classes;
    GenerationModel generation;
    TimeGrid grid;
    NetLoad net_load;
    std::vector<double> x0;  // GWh, length M
    std::vector<double> z0;  // GW, length M

    int num_classes() const { return static_cast<int>(classes.size()); }

    int class_index(const std::string& name) const {
        for (int i = 0; i < num_classes(); ++i)
            if (classes[i].name == name) return i;
        throw ValidationError("unknown load class '" + name + "'");
    }

    void validate() const {
        grid.validate();
        if (classes.empty()) throw ValidationError("scenario: at least one load class required");
        for (const auto& c : classes) {
            if (c.alpha < 0.0) throw ValidationError("class " + c.name + ": alpha must be >= 0");
            if (!(c.capacity > 0.0)) throw ValidationError("class " + c.name + ": capacity must be > 0");
            if (!(c.cost.convexity_mu() > 0.0))
                throw ValidationError("class " + c.name + ": cost is not strongly convex");
        }
        if (!(generation.ramp_kappa > 0.0))
            throw ValidationError("generation: ramp_kappa must be > 0");
        if (!(generation.cost_g.convexity_mu() > 0.0))
            throw ValidationError("generation: cost is not strongly convex");
        const std::size_t m = classes.size();
        if (x0.size() != m || z0.size() != m)
            throw ValidationError("scenario: x0/z0 length must match the number of classes");
        const std::size_t n = static_cast<std::size_t>(grid.nodes());
        if (net_load.values.size() != n || net_load.derivative.size() != n)
            throw ValidationError("scenario: net load not sampled on the grid");
        const double mean = detail::trapezoid_mean(net_load.values);
        if (std::abs(mean - net_load.mean) > 1e-9 * (1.0 + std::abs(mean)))
            throw ValidationError("scenario: stored net-load mean is stale");
    }
};

}  // namespace dispatch
