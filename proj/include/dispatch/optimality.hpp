#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dispatch/errors.hpp"
#include "dispatch/scenario.hpp"
#include "dispatch/transcribe.hpp"

namespace dispatch {

namespace fd_detail {

/// Time derivative of a node series: second-order one-sided at the ends,
/// centred in the interior.  Node 0 is never used (pre-jump data).
inline double ddt(const std::vector<double>& f, double h, int k, int n) {
    if (k <= 1) return (-3.0 * f[1] + 4.0 * f[2] - f[3]) / (2.0 * h);
    if (k >= n) return (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * h);
    return (f[k + 1] - f[k - 1]) / (2.0 * h);
}

struct MaxRms {
    double max = 0.0;
    double sum_sq = 0.0;
    long count = 0;

    void add(double r) {
        const double a = std::abs(r);
        if (a > max) max = a;
        sum_sq += r * r;
        ++count;
    }
    double rms() const { return count > 0 ? std::sqrt(sum_sq / count) : 0.0; }
};

}  // namespace fd_detail

/// Per-equation residuals of the first-order optimality system, evaluated on
/// the reported node trajectories with finite differences.
struct ResidualReport {
    struct Entry {
        std::string name;
        double max = 0.0;
        double rms = 0.0;
    };
    Entry r_soc;       // (17a) xdot + alpha x + z
    Entry r_ramp;      // (17b) zdot - u
    Entry r_lambda;    // (17c) lamdot + c_i'(x_i) - alpha lam, per class
    Entry r_beta;      // (17d) betdot - c_g'(l - z_sigma) - lam
    Entry r_usum;      // (17e) u_sigma - ldot + beta/(2 kappa)
    Entry r_collapse;  // Eq. (8) c_i'(x_i) - (alpha_i lam - lamdot)
    Entry r_ic0;       // corollary at 0+, evaluated at node 1
    double h = 0.0;
    int node_lo = 1;
    int node_hi = 0;

    std::vector<const Entry*> theorem1_entries() const {
        return {&r_soc, &r_ramp, &r_lambda, &r_beta, &r_usum};
    }
};

/// Max residual of the marginal-cost collapse relation (Eq. 8) over classes
/// and nodes k >= skip_nodes.
inline double collapse_residual(const DiscreteSolution& sol, const Scenario& sc,
                                int skip_nodes = 1) {
    if (skip_nodes < 1) throw ValidationError("collapse_residual: skip_nodes must be >= 1");
    const int n = sol.steps;
    const int m = sc.num_classes();
    const int hi = n - 3;  // terminal closure nodes are certified separately
    double worst = 0.0;
    for (int k = std::max(1, skip_nodes); k <= hi; ++k) {
        const double lam = sol.lambda_mean[k];
        const double dlam = fd_detail::ddt(sol.lambda_mean, sol.h, k, n);
        for (int i = 0; i < m; ++i) {
            const double r =
                sc.classes[i].cost.d1(sol.x[i][k]) - (sc.classes[i].alpha * lam - dlam);
            worst = std::max(worst, std::abs(r));
        }
    }
    return worst;
}

/// Residual of the initial-condition mapping c_i'(x(0+)) = alpha_i lam(0+) -
/// lamdot(0+), with 0+ read at node 1 and one-sided differences; per class.
inline std::vector<double> ic_mapping_check(const DiscreteSolution& sol, const Scenario& sc) {
    const int n = sol.steps;
    const int m = sc.num_classes();
    std::vector<double> out(m, 0.0);
    const double lam1 = sol.lambda_mean[1];
    const double dlam1 = fd_detail::ddt(sol.lambda_mean, sol.h, 1, n);
    for (int i = 0; i < m; ++i)
        out[i] = sc.classes[i].cost.d1(sol.x[i][1]) - (sc.classes[i].alpha * lam1 - dlam1);
    return out;
}

/// Full Theorem-1 certification of a solved trajectory.
inline ResidualReport theorem1_residuals(const DiscreteSolution& sol, const Scenario& sc) {
    const int n = sol.steps;
    const int m = sc.num_classes();
    if (n < 8) throw GridTooCoarse("theorem1_residuals: need at least 8 grid steps");
    const double h = sol.h;
    const double kappa = sc.generation.ramp_kappa;
    const auto& ell = sc.net_load.values;
    const auto& dell = sc.net_load.derivative;
    const auto& zs_raw = sol.internals.g_raw;  // g_raw = ell - z_sigma(raw)

    using fd_detail::MaxRms;
    using fd_detail::ddt;
    MaxRms soc, ramp, lam_r, bet_r, usum;
    const int lo = 1;
    const int hi = n - 3;  // tail closure certified by the transversality checks
    for (int k = lo; k <= hi; ++k) {
        double us = 0.0;
        for (int i = 0; i < m; ++i) {
            const double a = sc.classes[i].alpha;
            soc.add(ddt(sol.x[i], h, k, n) + a * sol.x[i][k] + sol.z[i][k]);
            ramp.add(ddt(sol.z[i], h, k, n) - sol.u[i][k]);
            lam_r.add(ddt(sol.lambda_c[i], h, k, n) + sc.classes[i].cost.d1(sol.x[i][k]) -
                      a * sol.lambda_c[i][k]);
            us += sol.u[i][k];
        }
        // the aggregate channel is evaluated on the raw sum (chatter-free)
        bet_r.add(ddt(sol.beta_mean, h, k, n) - sc.generation.cost_g.d1(zs_raw[k]) -
                  sol.lambda_mean[k]);
        usum.add(us - dell[k] + sol.beta_mean[k] / (2.0 * kappa));
        (void)ell;
    }

    ResidualReport rep;
    rep.h = h;
    rep.node_lo = lo;
    rep.node_hi = hi;
    auto fill = [](ResidualReport::Entry& e, const char* name, const MaxRms& s) {
        e.name = name;
        e.max = s.max;
        e.rms = s.rms();
    };
    fill(rep.r_soc, "soc_dynamics", soc);
    fill(rep.r_ramp, "deviation_ramp", ramp);
    fill(rep.r_lambda, "lambda_costate", lam_r);
    fill(rep.r_beta, "beta_costate", bet_r);
    fill(rep.r_usum, "aggregate_input", usum);

    MaxRms col;
    for (int k = lo; k <= hi; ++k) {
        const double lam = sol.lambda_mean[k];
        const double dlam = ddt(sol.lambda_mean, h, k, n);
        for (int i = 0; i < m; ++i)
            col.add(sc.classes[i].cost.d1(sol.x[i][k]) - (sc.classes[i].alpha * lam - dlam));
    }
    fill(rep.r_collapse, "marginal_cost_collapse", col);

    MaxRms ic;
    for (double r : ic_mapping_check(sol, sc)) ic.add(r);
    fill(rep.r_ic0, "initial_mapping", ic);
    return rep;
}

/// Structural invariants certified to multiplier tolerance rather than
/// discretization order.
struct StructuralChecks {
    double costate_collapse = 0.0;    // max |lam_i - lam_j|, |bet_i - bet_j|, k >= 1
    double price_duality = 0.0;       // max_k>=1 |rho_k + lam_k|
    double transversality = 0.0;      // max(|lam_N|, |bet_N|)
    double generator_costate = 0.0;   // max_k in [1, N-1] |eta_k + bet_k|
    double balance = 0.0;             // max_k |g_k + z_sigma_k - l_k| / (1 + |l_k|)
    double tol = 0.0;                 // 1e-6 (1 + max |lambda|)
};

inline StructuralChecks structural_checks(const DiscreteSolution& sol, const Scenario& sc) {
    const int n = sol.steps;
    const int m = sol.num_classes();
    StructuralChecks out;
    out.tol = 1e-6 * (1.0 + sol.max_abs_lambda());
    for (int k = 1; k <= n; ++k) {
        for (int i = 1; i < m; ++i) {
            out.costate_collapse = std::max(
                out.costate_collapse, std::abs(sol.lambda_c[i][k] - sol.lambda_c[0][k]));
            out.costate_collapse =
                std::max(out.costate_collapse, std::abs(sol.beta_c[i][k] - sol.beta_c[0][k]));
        }
        out.price_duality = std::max(out.price_duality, std::abs(sol.rho[k] + sol.lambda_mean[k]));
        if (k < n)
            out.generator_costate =
                std::max(out.generator_costate, std::abs(sol.eta[k] + sol.beta_mean[k]));
    }
    out.transversality = std::max(std::abs(sol.lambda_mean[n]), std::abs(sol.beta_mean[n]));
    for (int k = 0; k <= n; ++k) {
        double zs = 0.0;
        for (int i = 0; i < m; ++i) zs += sol.z[i][k];
        const double l = sc.net_load.values[k];
        out.balance = std::max(out.balance, std::abs(sol.g[k] + zs - l) / (1.0 + std::abs(l)));
    }
    return out;
}

/// The cheap-control redistribution input of the appendix lemma:
/// u_i(t) = (z_to_i - z_from_i) f(t) - (x_to_i - x_from_i) f'(t), with f the
/// C2 polynomial bump density 30 s^2 (1-s)^2 / delta on (0, delta).
struct RedistributionInput {
    std::vector<double> times;                // sample times in [0, delta]
    std::vector<std::vector<double>> u;       // M x samples
    double delta = 0.0;
};

inline RedistributionInput cheap_redistribution(const std::vector<double>& x_from,
                                                const std::vector<double>& z_from,
                                                const std::vector<double>& x_to,
                                                const std::vector<double>& z_to, double delta,
                                                const TimeGrid& grid) {
    const std::size_t m = x_from.size();
    if (z_from.size() != m || x_to.size() != m || z_to.size() != m)
        throw ValidationError("cheap_redistribution: state vectors must share one length");
    if (!(delta > 0.0)) throw ValidationError("cheap_redistribution: delta must be positive");
    double sx = 0.0, sz = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        sx += x_to[i] - x_from[i];
        sz += z_to[i] - z_from[i];
    }
    if (std::abs(sx) > 1e-9 || std::abs(sz) > 1e-9)
        throw SumMismatch("cheap_redistribution: aggregate sums must match");

    auto f = [&](double t) {
        const double s = t / delta;
        if (s <= 0.0 || s >= 1.0) return 0.0;
        const double q = s * (1.0 - s);
        return 30.0 * q * q / delta;
    };
    auto fprime = [&](double t) {
        const double s = t / delta;
        if (s <= 0.0 || s >= 1.0) return 0.0;
        return 30.0 * 2.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / (delta * delta);
    };

    RedistributionInput out;
    out.delta = delta;
    const double h = grid.h();
    const int samples = std::max(2, static_cast<int>(std::ceil(delta / h))) ;
    for (int k = 0; k <= samples; ++k) out.times.push_back(delta * k / samples);
    out.u.assign(m, std::vector<double>(out.times.size(), 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        const double dz = z_to[i] - z_from[i];
        const double dx = x_to[i] - x_from[i];
        for (std::size_t k = 0; k < out.times.size(); ++k)
            out.u[i][k] = dz * f(out.times[k]) - dx * fprime(out.times[k]);
    }
    return out;
}

}  // namespace dispatch
