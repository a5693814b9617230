#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dispatch/collapse.hpp"
#include "dispatch/economics.hpp"
#include "dispatch/errors.hpp"
#include "dispatch/optimality.hpp"
#include "dispatch/transcribe.hpp"

namespace dispatch {

/// All floats are serialized with 17 significant digits so identical runs
/// produce byte-identical outputs.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Write a file atomically (write to a sibling temp path, then rename).
inline void atomic_write(const std::filesystem::path& path, const std::string& contents) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp + "' for writing");
        out << contents;
    }
    std::filesystem::rename(tmp, path);
}

/// Solution CSV: one row per node, columns
/// t, g, gamma, rho, lambda, beta, x_<name>..., z_<name>..., u_<name>...
inline std::string solution_to_csv(const DiscreteSolution& sol) {
    std::ostringstream out;
    out << "t,g,gamma,rho,lambda,beta";
    for (const auto& n : sol.class_names) out << ",x_" << n;
    for (const auto& n : sol.class_names) out << ",z_" << n;
    for (const auto& n : sol.class_names) out << ",u_" << n;
    out << "\n";
    const int m = sol.num_classes();
    for (int k = 0; k <= sol.steps; ++k) {
        out << format_double(sol.t[k]) << ',' << format_double(sol.g[k]) << ','
            << format_double(sol.gamma[k]) << ',' << format_double(sol.rho[k]) << ','
            << format_double(sol.lambda_mean[k]) << ',' << format_double(sol.beta_mean[k]);
        for (int i = 0; i < m; ++i) out << ',' << format_double(sol.x[i][k]);
        for (int i = 0; i < m; ++i) out << ',' << format_double(sol.z[i][k]);
        for (int i = 0; i < m; ++i) out << ',' << format_double(sol.u[i][k]);
        out << "\n";
    }
    return out.str();
}

/// Node trajectories read back from a solution CSV (the re-certification
/// entry point works from these).
struct SolutionTable {
    std::vector<std::string> class_names;
    std::vector<double> t, g, gamma, rho, lambda, beta;
    std::vector<std::vector<double>> x, z, u;

    int steps() const { return static_cast<int>(t.size()) - 1; }
};

inline SolutionTable solution_from_csv(const std::string& csv_text) {
    std::istringstream in(csv_text);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("solution csv: empty file");
    std::vector<std::string> header;
    {
        std::string cell;
        std::istringstream hs(line);
        while (std::getline(hs, cell, ',')) {
            if (!cell.empty() && cell.back() == '\r') cell.pop_back();
            header.push_back(cell);
        }
    }
    static const char* fixed[] = {"t", "g", "gamma", "rho", "lambda", "beta"};
    for (int i = 0; i < 6; ++i)
        if (static_cast<int>(header.size()) <= i || header[i] != fixed[i])
            throw ParseError("solution csv: unexpected header");
    SolutionTable tab;
    for (std::size_t c = 6; c < header.size(); ++c) {
        if (header[c].rfind("x_", 0) == 0) tab.class_names.push_back(header[c].substr(2));
    }
    const int m = static_cast<int>(tab.class_names.size());
    if (header.size() != 6 + 3 * static_cast<std::size_t>(m))
        throw ParseError("solution csv: column count does not match the class list");
    tab.x.assign(m, {});
    tab.z.assign(m, {});
    tab.u.assign(m, {});
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ParseError("solution csv: non-numeric cell");
            }
        }
        if (row.size() != header.size()) throw ParseError("solution csv: short row");
        tab.t.push_back(row[0]);
        tab.g.push_back(row[1]);
        tab.gamma.push_back(row[2]);
        tab.rho.push_back(row[3]);
        tab.lambda.push_back(row[4]);
        tab.beta.push_back(row[5]);
        for (int i = 0; i < m; ++i) {
            tab.x[i].push_back(row[6 + i]);
            tab.z[i].push_back(row[6 + m + i]);
            tab.u[i].push_back(row[6 + 2 * m + i]);
        }
    }
    if (tab.t.size() < 9) throw ParseError("solution csv: too few rows");
    return tab;
}

inline nlohmann::json to_json(const ResidualReport& rep) {
    auto entry = [](const ResidualReport::Entry& e) {
        return nlohmann::json{{"name", e.name}, {"max", e.max}, {"rms", e.rms}};
    };
    return nlohmann::json{
        {"h", rep.h},
        {"node_range", {rep.node_lo, rep.node_hi}},
        {"soc_dynamics", entry(rep.r_soc)},
        {"deviation_ramp", entry(rep.r_ramp)},
        {"lambda_costate", entry(rep.r_lambda)},
        {"beta_costate", entry(rep.r_beta)},
        {"aggregate_input", entry(rep.r_usum)},
        {"marginal_cost_collapse", entry(rep.r_collapse)},
        {"initial_mapping", entry(rep.r_ic0)},
    };
}

inline nlohmann::json to_json(const StructuralChecks& c) {
    return nlohmann::json{
        {"costate_collapse", c.costate_collapse},
        {"price_duality", c.price_duality},
        {"transversality", c.transversality},
        {"generator_costate", c.generator_costate},
        {"balance", c.balance},
        {"tolerance", c.tol},
    };
}

inline nlohmann::json to_json(const PriceReport& rep, const std::vector<std::string>& names) {
    nlohmann::json classes = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
        nlohmann::json c{{"name", names[i]},
                         {"mv_avg", rep.mv_avg[i]},
                         {"qos", rep.qos[i]},
                         {"alpha_applicable", static_cast<bool>(rep.alpha_applicable[i])}};
        if (rep.alpha_applicable[i]) {
            c["e_d"] = rep.e_d[i];
            c["mv_identity_residual"] = rep.mv_identity_residual[i];
        }
        classes.push_back(std::move(c));
    }
    return nlohmann::json{
        {"rho_avg", rep.rho_avg},
        {"mc_g_avg", rep.mc_g_avg},
        {"e_g", rep.e_g},
        {"mc_identity_residual", rep.mc_identity_residual},
        {"duality_gap", rep.duality_gap},
        {"welfare", rep.welfare},
        {"classes", classes},
    };
}

/// Recovery CSV: t, lambda, dlambda, x_<name>_recovered...
inline std::string recovery_to_csv(const std::vector<double>& t, const Reconstruction& rec,
                                   const std::vector<std::string>& target_names,
                                   const std::vector<std::vector<double>>& recovered) {
    std::ostringstream out;
    out << "t,lambda,dlambda";
    for (const auto& n : target_names) out << ",x_" << n << "_recovered";
    out << "\n";
    for (std::size_t k = 0; k < t.size(); ++k) {
        out << format_double(t[k]) << ',' << format_double(rec.lambda[k]) << ','
            << format_double(rec.dlambda[k]);
        for (const auto& col : recovered) out << ',' << format_double(col[k]);
        out << "\n";
    }
    return out.str();
}

/// One named re-certification check computed from an exported solution CSV.
struct CertCheck {
    std::string name;
    double value = 0.0;
    double tol = 0.0;
    bool pass = false;
};

/// Recompute the certification suite from exported node trajectories.  The
/// finite-difference residual bounds are loose sanity bands (the sharp order
/// statements live in the refinement studies); the structural identities are
/// checked at multiplier tolerance.
inline std::vector<CertCheck> recertify(const SolutionTable& tab, const Scenario& sc,
                                        int skip_nodes = 1, double resid_tol = 1.0) {
    const int n = tab.steps();
    const int m = static_cast<int>(tab.class_names.size());
    if (sc.num_classes() != m || sc.grid.steps != n)
        throw ValidationError("recertify: solution grid/classes do not match the scenario");
    if (n < 8) throw GridTooCoarse("recertify: need at least 8 grid steps");
    const double h = sc.grid.h();
    const auto& ell = sc.net_load.values;
    const auto& dell = sc.net_load.derivative;
    const double kappa = sc.generation.ramp_kappa;

    double max_lam = 0.0;
    for (double v : tab.lambda) max_lam = std::max(max_lam, std::abs(v));
    const double tol_mult = 1e-6 * (1.0 + max_lam);

    std::vector<CertCheck> checks;
    auto push = [&](const std::string& name, double value, double tol) {
        checks.push_back({name, value, tol, std::abs(value) <= tol});
    };

    double balance = 0.0;
    for (int k = 0; k <= n; ++k) {
        double zs = 0.0;
        for (int i = 0; i < m; ++i) zs += tab.z[i][k];
        balance = std::max(balance, std::abs(tab.g[k] + zs - ell[k]) / (1.0 + std::abs(ell[k])));
    }
    push("balance", balance, 1e-8);

    double duality = 0.0;
    for (int k = 1; k <= n; ++k)
        duality = std::max(duality, std::abs(tab.rho[k] + tab.lambda[k]));
    push("prop4_price_duality", duality, tol_mult);

    push("transversality_lambda", tab.lambda[n], tol_mult);
    push("transversality_beta", tab.beta[n], tol_mult);

    using fd_detail::ddt;
    const int lo = std::max(1, skip_nodes);
    const int hi = n - 3;
    double soc = 0.0, ramp = 0.0, lam_r = 0.0, bet_r = 0.0, usum = 0.0, col = 0.0;
    for (int k = lo; k <= hi; ++k) {
        double us = 0.0, zs = 0.0;
        const double dlam = ddt(tab.lambda, h, k, n);
        for (int i = 0; i < m; ++i) {
            const double a = sc.classes[i].alpha;
            soc = std::max(soc, std::abs(ddt(tab.x[i], h, k, n) + a * tab.x[i][k] + tab.z[i][k]));
            ramp = std::max(ramp, std::abs(ddt(tab.z[i], h, k, n) - tab.u[i][k]));
            const double mc = sc.classes[i].cost.d1(tab.x[i][k]);
            lam_r = std::max(lam_r, std::abs(dlam + mc - a * tab.lambda[k]));
            col = std::max(col, std::abs(mc - (a * tab.lambda[k] - dlam)));
            us += tab.u[i][k];
            zs += tab.z[i][k];
        }
        bet_r = std::max(bet_r, std::abs(ddt(tab.beta, h, k, n) -
                                         sc.generation.cost_g.d1(ell[k] - zs) - tab.lambda[k]));
        usum = std::max(usum, std::abs(us - dell[k] + tab.beta[k] / (2.0 * kappa)));
    }
    push("residual_soc", soc, resid_tol);
    push("residual_ramp", ramp, resid_tol);
    push("residual_lambda", lam_r, resid_tol);
    push("residual_beta", bet_r, resid_tol);
    push("residual_usum", usum, resid_tol);
    push("collapse_eq8", col, resid_tol);
    return checks;
}

/// FNV-1a hash of the raw scenario config, recorded in the run manifest.
inline std::string fnv1a_hex(const std::string& data) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace dispatch
