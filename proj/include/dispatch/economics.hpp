#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <string>
#include <vector>

#include "dispatch/errors.hpp"
#include "dispatch/optimality.hpp"
#include "dispatch/scenario.hpp"
#include "dispatch/transcribe.hpp"

namespace dispatch {

/// Price trajectory at nodes plus its interval-midpoint samples, which is the
/// form the decomposed subproblems consume.
struct PriceSignal {
    std::vector<double> node;  // N+1
    std::vector<double> mid;   // N

    /// Exact discrete equilibrium price of a solved program.
    static PriceSignal from_solution(const DiscreteSolution& sol) {
        PriceSignal p;
        p.node.resize(sol.steps + 1);
        for (int k = 0; k <= sol.steps; ++k) p.node[k] = -sol.lambda_mean[k];
        p.mid = sol.internals.rho_mid;
        return p;
    }

    /// External price samples at nodes; midpoints by pair averaging.
    static PriceSignal from_nodes(std::vector<double> nodes) {
        PriceSignal p;
        p.mid.resize(nodes.size() - 1);
        for (std::size_t k = 0; k + 1 < nodes.size(); ++k)
            p.mid[k] = 0.5 * (nodes[k] + nodes[k + 1]);
        p.node = std::move(nodes);
        return p;
    }
};

/// The competitive-equilibrium price: rho*(t) = -lambda*(t) for t > 0, with
/// the cross-check against the balance multiplier reported alongside.
struct EquilibriumPrice {
    std::vector<double> value;        // -lambda at nodes
    double multiplier_mismatch = 0.;  // max_k>=1 |value_k - rho_k|
};

inline EquilibriumPrice equilibrium_price(const DiscreteSolution& sol) {
    EquilibriumPrice out;
    out.value.resize(sol.steps + 1);
    for (int k = 0; k <= sol.steps; ++k) out.value[k] = -sol.lambda_mean[k];
    for (int k = 1; k <= sol.steps; ++k)
        out.multiplier_mismatch =
            std::max(out.multiplier_mismatch, std::abs(out.value[k] - sol.rho[k]));
    return out;
}

/// Average-price identities (Prop 5), welfare and QoS summary.
struct PriceReport {
    double rho_avg = 0.0;
    double mc_g_avg = 0.0;
    std::vector<double> mv_avg;          // per class
    std::vector<double> e_d;             // per class; NaN where alpha = 0
    std::vector<bool> alpha_applicable;  // identity (e:MVavg) defined?
    double e_g = 0.0;
    std::vector<double> mv_identity_residual;  // rho_avg - MV_i/alpha_i - e_i/T
    double mc_identity_residual = 0.0;         // rho_avg - MC_g - e_g/T
    double duality_gap = 0.0;                  // primal - dual at the solved price
    double welfare = 0.0;
    std::vector<double> qos;  // per class
};

namespace econ_detail {

inline double trapz_mean(const std::vector<double>& f, double h, double horizon) {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < f.size(); ++k) s += 0.5 * h * (f[k] + f[k + 1]);
    return s / horizon;
}

}  // namespace econ_detail

/// Welfare is the negative of the social cost; QoS_i the integral of c_i(x_i).
inline std::pair<double, std::vector<double>> welfare_and_qos(const DiscreteSolution& sol,
                                                              const Scenario& sc) {
    const int n = sol.steps;
    const int m = sc.num_classes();
    std::vector<double> qos(m, 0.0);
    for (int i = 0; i < m; ++i) {
        std::vector<double> c(n + 1);
        for (int k = 0; k <= n; ++k) c[k] = sc.classes[i].cost.eval(sol.x[i][k]);
        qos[i] = econ_detail::trapz_mean(c, sol.h, 1.0);  // horizon factor 1: plain integral
    }
    return {-sol.objective, qos};
}

/// Solution of the generator's decoupled problem (e:grid).
struct GeneratorResponse {
    std::vector<double> g;          // N+1
    std::vector<double> gamma_mid;  // N
    double value = 0.0;             // includes the +rho*ell data term
};

/// Solution of one load class's decoupled problem (e:aggregator).
struct ClassResponse {
    std::vector<double> x;  // N+1
    double value = 0.0;
};

/// Generator subproblem: min over g of the priced generation cost with the
/// ramp quadrature at interval midpoints; g(0) pinned to the balance value.
inline GeneratorResponse solve_generator_subproblem(const PriceSignal& price, const Scenario& sc,
                                                    Scheme scheme, double g0, double tol = 1e-10,
                                                    int max_iters = 50) {
    const bool trap = scheme == Scheme::Trapezoidal;
    const int n = sc.grid.steps;
    const double h = sc.grid.h();
    const double kappa = sc.generation.ramp_kappa;
    const auto& ell = sc.net_load.values;
    std::vector<double> w(static_cast<std::size_t>(n) + 1, h);
    w[0] = 0.5 * h;
    w[n] = 0.5 * h;

    // unknowns g_1..g_N
    Eigen::VectorXd g(n);
    for (int k = 0; k < n; ++k) g(k) = g0;
    auto gval = [&](int k) { return k == 0 ? g0 : g(k - 1); };

    auto price_coeff = [&](int k) {  // d/dg_k of the priced-balance term
        if (trap) {
            double c = 0.0;
            if (k >= 1) c += 0.5 * h * price.mid[k - 1];
            if (k < n) c += 0.5 * h * price.mid[k];
            return c;
        }
        return (k >= 1) ? h * price.mid[k - 1] : 0.0;
    };

    auto grad = [&](Eigen::VectorXd& out) {
        out.setZero();
        for (int k = 1; k <= n; ++k)
            out(k - 1) = w[k] * sc.generation.cost_g.d1(gval(k)) - price_coeff(k);
        for (int k = 0; k < n; ++k) {
            const double gam = (gval(k + 1) - gval(k)) / h;
            if (k >= 1) out(k - 1) += -2.0 * kappa * gam;
            out(k) += 2.0 * kappa * gam;
        }
    };

    Eigen::VectorXd gr(n), d(n);
    int it = 0;
    while (true) {
        grad(gr);
        if (gr.lpNorm<Eigen::Infinity>() <= tol) break;
        if (it++ >= max_iters)
            throw MaxIters("generator subproblem did not converge");
        std::vector<Eigen::Triplet<double>> trips;
        for (int k = 1; k <= n; ++k)
            trips.emplace_back(k - 1, k - 1, w[k] * sc.generation.cost_g.d2(gval(k)));
        const double r = 2.0 * kappa / h;
        for (int k = 0; k < n; ++k) {
            if (k >= 1) {
                trips.emplace_back(k - 1, k - 1, r);
                trips.emplace_back(k - 1, k, -r);
                trips.emplace_back(k, k - 1, -r);
            }
            trips.emplace_back(k, k, r);
        }
        Eigen::SparseMatrix<double> hess(n, n);
        hess.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(hess);
        if (lu.info() != Eigen::Success) throw SingularKkt("generator subproblem Hessian singular");
        d = lu.solve(-gr);
        g += d;
    }

    GeneratorResponse out;
    out.g.resize(n + 1);
    out.g[0] = g0;
    for (int k = 1; k <= n; ++k) out.g[k] = g(k - 1);
    out.gamma_mid.resize(n);
    for (int k = 0; k < n; ++k) out.gamma_mid[k] = (out.g[k + 1] - out.g[k]) / h;
    double value = 0.0;
    for (int k = 0; k <= n; ++k) value += w[k] * sc.generation.cost_g.eval(out.g[k]);
    for (int k = 0; k < n; ++k) value += h * kappa * out.gamma_mid[k] * out.gamma_mid[k];
    for (int k = 0; k < n; ++k) {
        const double gbar = trap ? 0.5 * (out.g[k] + out.g[k + 1]) : out.g[k + 1];
        const double lbar = trap ? 0.5 * (ell[k] + ell[k + 1]) : ell[k + 1];
        value += h * price.mid[k] * (lbar - gbar);
    }
    out.value = value;
    return out;
}

/// Class subproblem in (x, xdot): pointwise strictly convex, solved by the
/// inverse marginal cost.  x(0) is pinned to the post-jump state.
inline ClassResponse solve_class_subproblem(const PriceSignal& price, const Scenario& sc,
                                            Scheme scheme, int cls, double x_init) {
    const bool trap = scheme == Scheme::Trapezoidal;
    const int n = sc.grid.steps;
    const double h = sc.grid.h();
    const double a = sc.classes[cls].alpha;
    const CostFunction& cost = sc.classes[cls].cost;
    std::vector<double> w(static_cast<std::size_t>(n) + 1, h);
    w[0] = 0.5 * h;
    w[n] = 0.5 * h;

    ClassResponse out;
    out.x.assign(n + 1, 0.0);
    out.x[0] = x_init;
    for (int k = 1; k <= n; ++k) {
        double lin = 0.0;  // d/dx_k of the priced terms
        if (trap) {
            if (k >= 1) lin += 0.5 * h * a * price.mid[k - 1] + price.mid[k - 1];
            if (k < n) lin += 0.5 * h * a * price.mid[k] - price.mid[k];
        } else {
            lin += h * a * price.mid[k - 1] + price.mid[k - 1];
            if (k < n) lin += -price.mid[k];
        }
        out.x[k] = cost.inv_d1(-lin / w[k]);
    }
    double value = 0.0;
    for (int k = 0; k <= n; ++k) value += w[k] * cost.eval(out.x[k]);
    for (int k = 0; k < n; ++k) {
        const double xbar = trap ? 0.5 * (out.x[k] + out.x[k + 1]) : out.x[k + 1];
        value += h * price.mid[k] * (a * xbar + (out.x[k + 1] - out.x[k]) / h);
    }
    out.value = value;
    return out;
}

/// The dual functional phi*(rho): the summed optima of the M+1 decoupled
/// problems.  Initial states are the post-jump values of the solved program,
/// which is what makes weak duality exact for the discrete pairing.
struct DualValue {
    double value = 0.0;
    GeneratorResponse generator;
    std::vector<ClassResponse> classes;
};

inline DualValue dual_value(const PriceSignal& price, const Scenario& sc, Scheme scheme,
                            const std::vector<double>& x_init, double g0) {
    DualValue out;
    out.generator = solve_generator_subproblem(price, sc, scheme, g0);
    out.value = out.generator.value;
    for (int i = 0; i < sc.num_classes(); ++i) {
        out.classes.push_back(solve_class_subproblem(price, sc, scheme, i, x_init[i]));
        out.value += out.classes.back().value;
    }
    return out;
}

inline DualValue dual_value(const PriceSignal& price, const Scenario& sc,
                            const DiscreteSolution& sol) {
    return dual_value(price, sc, sol.scheme, sol.x_plus, sol.internals.g_raw[0]);
}

/// Residuals of the decoupled Euler-Lagrange equations (Prop 3) on the
/// subproblem optimizers, plus the terminal conditions.
struct EulerLagrangeResiduals {
    double generator_max = 0.0;  // (e:ELg)
    double classes_max = 0.0;    // (e:EL)
    double terminal_ramp = 0.0;  // |c_d'(gdot(T))| = |2 kappa gamma(T)|
    double terminal_price = 0.0; // |rho(T)|
};

inline EulerLagrangeResiduals euler_lagrange_residuals(const PriceSignal& price,
                                                       const DualValue& dual,
                                                       const Scenario& sc) {
    EulerLagrangeResiduals out;
    const int n = sc.grid.steps;
    const double h = sc.grid.h();
    const double kappa = sc.generation.ramp_kappa;
    for (int k = 1; k < n; ++k) {
        const double dcd = 2.0 * kappa *
                           (dual.generator.gamma_mid[k] - dual.generator.gamma_mid[k - 1]) / h;
        out.generator_max = std::max(
            out.generator_max,
            std::abs(sc.generation.cost_g.d1(dual.generator.g[k]) - dcd - price.node[k]));
    }
    for (int i = 0; i < sc.num_classes(); ++i) {
        const double a = sc.classes[i].alpha;
        for (int k = 1; k < n; ++k) {
            const double drho = (price.node[k + 1] - price.node[k - 1]) / (2.0 * h);
            out.classes_max = std::max(
                out.classes_max, std::abs(sc.classes[i].cost.d1(dual.classes[i].x[k]) +
                                          a * price.node[k] - drho));
        }
    }
    out.terminal_ramp = std::abs(2.0 * kappa * (1.5 * dual.generator.gamma_mid[n - 1] -
                                                0.5 * dual.generator.gamma_mid[n - 2]));
    out.terminal_price = std::abs(price.node[n]);
    return out;
}

/// The Prop-5 average-price report.  rho(0+) is read at node 1.
inline PriceReport averages(const DiscreteSolution& sol, const Scenario& sc) {
    const int n = sol.steps;
    const int m = sc.num_classes();
    const double T = sol.horizon;
    const double h = sol.h;
    const double kappa = sc.generation.ramp_kappa;

    PriceReport rep;
    std::vector<double> rho(n + 1);
    for (int k = 0; k <= n; ++k) rho[k] = -sol.lambda_mean[k];
    rho[0] = rho[1];  // the price exists on (0, T]
    rep.rho_avg = econ_detail::trapz_mean(rho, h, T);

    std::vector<double> mcg(n + 1);
    for (int k = 0; k <= n; ++k) mcg[k] = sc.generation.cost_g.d1(sol.g[k]);
    rep.mc_g_avg = econ_detail::trapz_mean(mcg, h, T);

    rep.mv_avg.resize(m);
    rep.e_d.resize(m);
    rep.alpha_applicable.resize(m);
    rep.mv_identity_residual.resize(m);
    const double rho_T = rho[n];
    const double rho_0 = rho[1];
    for (int i = 0; i < m; ++i) {
        std::vector<double> mc(n + 1);
        for (int k = 0; k <= n; ++k) mc[k] = -sc.classes[i].cost.d1(sol.x[i][k]);
        rep.mv_avg[i] = econ_detail::trapz_mean(mc, h, T);
        const double a = sc.classes[i].alpha;
        rep.alpha_applicable[i] = a > 0.0;
        if (a > 0.0) {
            rep.e_d[i] = (rho_T - rho_0) / a;
            rep.mv_identity_residual[i] = rep.rho_avg - rep.mv_avg[i] / a - rep.e_d[i] / T;
        } else {
            rep.e_d[i] = std::numeric_limits<double>::quiet_NaN();
            rep.mv_identity_residual[i] = std::numeric_limits<double>::quiet_NaN();
        }
    }
    rep.e_g = 2.0 * kappa * (sol.gamma[1] - sol.gamma[n]);
    rep.mc_identity_residual = rep.rho_avg - rep.mc_g_avg - rep.e_g / T;

    const auto dual = dual_value(PriceSignal::from_solution(sol), sc, sol);
    rep.duality_gap = sol.objective - dual.value;

    auto [welfare, qos] = welfare_and_qos(sol, sc);
    rep.welfare = welfare;
    rep.qos = std::move(qos);
    return rep;
}

}  // namespace dispatch
