// Command-line front end: solve a scenario, re-certify an exported solution,
// recover class trajectories from the co-state pair, and run grid-refinement
// sweeps.  All outputs are plain CSV/JSON plot data written atomically.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "dispatch/collapse.hpp"
#include "dispatch/config.hpp"
#include "dispatch/economics.hpp"
#include "dispatch/optimality.hpp"
#include "dispatch/solution_io.hpp"
#include "dispatch/transcribe.hpp"

namespace fs = std::filesystem;
using namespace dispatch;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;
constexpr int kExitCheckFailed = 4;
constexpr int kExitSingularPair = 5;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct SolveArgs {
    std::string scenario_path;
    int steps = 0;  // 0: use the config value
    std::string scheme = "trapezoidal";
    double tol = 1e-9;
    std::string out_dir = ".";
};

int run_solve(const SolveArgs& args, const std::string& command_line) {
    const auto t_start = std::chrono::steady_clock::now();
    std::string config_text;
    Scenario sc;
    Scheme scheme;
    try {
        config_text = read_file(args.scenario_path);
        scheme = scheme_from_string(args.scheme);
        sc = load_scenario_file(args.scenario_path,
                                args.steps > 0 ? std::optional<int>(args.steps) : std::nullopt);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    DiscreteSolution sol;
    try {
        sol = solve(build(sc, scheme), args.tol);
    } catch (const MaxIters& e) {
        std::cerr << "solver failure (MaxIters): " << e.what() << "\n";
        return kExitSolver;
    } catch (const SingularKkt& e) {
        std::cerr << "solver failure (SingularKKT): " << e.what() << "\n";
        return kExitSolver;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    const auto report = theorem1_residuals(sol, sc);
    const auto checks = structural_checks(sol, sc);
    const auto prices = averages(sol, sc);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    atomic_write(out / "solution.csv", solution_to_csv(sol));
    atomic_write(out / "residuals.json", to_json(report).dump(2) + "\n");
    {
        nlohmann::json j = to_json(prices, sol.class_names);
        j["structural_checks"] = to_json(checks);
        atomic_write(out / "prices.json", j.dump(2) + "\n");
    }

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    nlohmann::json manifest{
        {"scenario", args.scenario_path},
        {"scenario_hash", fnv1a_hex(config_text)},
        {"grid", {{"horizon_hours", sc.grid.horizon_hours}, {"steps", sc.grid.steps}}},
        {"scheme", to_string(scheme)},
        {"tolerance", args.tol},
        {"command", command_line},
        {"outputs", {"solution.csv", "residuals.json", "prices.json"}},
        {"objective", sol.objective},
        {"newton_iters", sol.newton_iters},
        {"kkt_residual", sol.kkt_residual},
        {"wall_seconds", wall},
    };
    atomic_write(out / "manifest.json", manifest.dump(2) + "\n");

    std::cout << "solved " << args.scenario_path << " scheme=" << to_string(scheme)
              << " N=" << sc.grid.steps << " objective=" << format_double(sol.objective)
              << " iters=" << sol.newton_iters << " kkt=" << format_double(sol.kkt_residual)
              << "\n";
    return 0;
}

int run_check(const std::string& solution_path, const std::string& scenario_path, int skip_nodes,
              double resid_tol) {
    SolutionTable tab;
    Scenario sc;
    try {
        tab = solution_from_csv(read_file(solution_path));
        sc = load_scenario_file(scenario_path, tab.steps());
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    std::vector<CertCheck> checks;
    try {
        checks = recertify(tab, sc, skip_nodes, resid_tol);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    bool ok = true;
    std::printf("%-24s %-14s %-14s %s\n", "check", "value", "tolerance", "status");
    for (const auto& c : checks) {
        std::printf("%-24s %-14.4e %-14.4e %s\n", c.name.c_str(), c.value, c.tol,
                    c.pass ? "pass" : "FAIL");
        ok = ok && c.pass;
    }
    if (!ok) {
        for (const auto& c : checks)
            if (!c.pass) std::cerr << "violated invariant: " << c.name << "\n";
        return kExitCheckFailed;
    }
    return 0;
}

int run_recover(const std::string& solution_path, const std::string& scenario_path,
                const std::string& from, const std::string& target, const std::string& out_path) {
    SolutionTable tab;
    Scenario sc;
    try {
        tab = solution_from_csv(read_file(solution_path));
        sc = load_scenario_file(scenario_path, tab.steps());
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    const auto comma = from.find(',');
    if (comma == std::string::npos) {
        std::cerr << "error: --from expects two class names, e.g. acs,fwh\n";
        return kExitUsage;
    }
    int ia, ib;
    std::vector<int> targets;
    try {
        ia = sc.class_index(from.substr(0, comma));
        ib = sc.class_index(from.substr(comma + 1));
        if (target == "all") {
            for (int i = 0; i < sc.num_classes(); ++i)
                if (i != ia && i != ib) targets.push_back(i);
        } else {
            targets.push_back(sc.class_index(target));
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        const auto rec = reconstruct(tab.x[ia], tab.x[ib], sc.classes[ia], sc.classes[ib], ia, ib);
        std::vector<std::string> names;
        std::vector<std::vector<double>> recovered;
        for (int i : targets) {
            names.push_back(sc.classes[i].name);
            recovered.push_back(recover_class(rec, sc.classes[i]));
        }
        atomic_write(out_path, recovery_to_csv(tab.t, rec, names, recovered));
        std::cout << "condition_number=" << format_double(rec.condition_number) << "\n";
        for (std::size_t j = 0; j < targets.size(); ++j) {
            double err = 0.0;
            const int n = tab.steps();
            for (int k = 1; k <= n; ++k)
                err = std::max(err, std::abs(recovered[j][k] - tab.x[targets[j]][k]));
            std::cout << "max_error x_" << names[j] << " = " << format_double(err)
                      << " (capacity " << format_double(sc.classes[targets[j]].capacity) << ")\n";
        }
    } catch (const SingularPair& e) {
        std::cerr << "error (SingularPair): " << e.what() << "\n";
        return kExitSingularPair;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return 0;
}

int run_sweep(const std::string& scenario_path, const std::vector<int>& steps,
              const std::string& scheme_name, double tol, const std::string& out_path) {
    for (std::size_t i = 1; i < steps.size(); ++i)
        if (steps[i] <= steps[i - 1]) {
            std::cerr << "error: --steps must be strictly increasing\n";
            return kExitUsage;
        }
    Scheme scheme;
    try {
        scheme = scheme_from_string(scheme_name);
        load_scenario_file(scenario_path, steps.front());  // validate early
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    int max_threads = static_cast<int>(steps.size());
    if (const char* env = std::getenv("DISPATCH_THREADS")) {
        const int cap = std::atoi(env);
        if (cap >= 1) max_threads = std::min(max_threads, cap);
    }

    struct RunOut {
        int n = 0;
        double h = 0.0;
        ResidualReport rep;
        std::string error;
    };
    std::vector<RunOut> runs(steps.size());
    std::vector<std::thread> pool;
    std::size_t next = 0;
    std::mutex mtx;
    auto worker = [&]() {
        while (true) {
            std::size_t job;
            {
                std::lock_guard<std::mutex> lock(mtx);
                if (next >= steps.size()) return;
                job = next++;
            }
            RunOut& r = runs[job];
            r.n = steps[job];
            try {
                const Scenario sc = load_scenario_file(scenario_path, r.n);
                const auto sol = solve(build(sc, scheme), tol);
                r.rep = theorem1_residuals(sol, sc);
                r.h = sol.h;
            } catch (const std::exception& e) {
                r.error = e.what();
            }
        }
    };
    for (int i = 0; i < max_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    for (const auto& r : runs)
        if (!r.error.empty()) {
            std::cerr << "solver failure at N=" << r.n << ": " << r.error << "\n";
            return kExitSolver;
        }

    const char* names[] = {"soc", "ramp", "lambda", "beta", "usum"};
    auto entry = [&](const RunOut& r, int e) -> const ResidualReport::Entry& {
        return *r.rep.theorem1_entries()[e];
    };
    std::printf("%8s %12s", "N", "h");
    for (const char* n : names) std::printf(" %12s", n);
    std::printf("\n");
    for (const auto& r : runs) {
        std::printf("%8d %12.5e", r.n, r.h);
        for (int e = 0; e < 5; ++e) std::printf(" %12.5e", entry(r, e).rms);
        std::printf("\n");
    }
    nlohmann::json jruns = nlohmann::json::array();
    for (const auto& r : runs) {
        nlohmann::json jr{{"N", r.n}, {"h", r.h}};
        for (int e = 0; e < 5; ++e) {
            jr[names[e]] = {{"rms", entry(r, e).rms}, {"max", entry(r, e).max}};
        }
        jruns.push_back(std::move(jr));
    }
    nlohmann::json jout{{"scheme", scheme_name}, {"runs", jruns}};
    if (runs.size() >= 2) {
        // least-squares slope of log(rms) against log(h)
        nlohmann::json orders;
        for (int e = 0; e < 5; ++e) {
            double sx = 0, sy = 0, sxx = 0, sxy = 0;
            int cnt = 0;
            for (const auto& r : runs) {
                const double lx = std::log(r.h);
                const double ly = std::log(std::max(entry(r, e).rms, 1e-300));
                sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
                ++cnt;
            }
            const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
            orders[names[e]] = slope;
            std::printf("fitted order %-8s %8.3f\n", names[e], slope);
        }
        jout["fitted_orders"] = orders;
    } else {
        std::printf("fitted order: n/a (single grid)\n");
        jout["fitted_orders"] = nullptr;
    }
    if (!out_path.empty()) atomic_write(out_path, jout.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"demand-dispatch resource allocation: solve, certify, price, recover"};
    app.require_subcommand(1);

    std::string command_line;
    for (int i = 0; i < argc; ++i) {
        if (i) command_line += ' ';
        command_line += argv[i];
    }

    SolveArgs solve_args;
    auto* cmd_solve = app.add_subcommand("solve", "solve a scenario and write plot data");
    cmd_solve->add_option("--scenario", solve_args.scenario_path, "scenario config path")
        ->required();
    cmd_solve->add_option("--steps", solve_args.steps, "override grid steps");
    cmd_solve->add_option("--scheme", solve_args.scheme, "euler|trapezoidal");
    cmd_solve->add_option("--tol", solve_args.tol, "KKT residual tolerance");
    cmd_solve->add_option("--out", solve_args.out_dir, "output directory");

    std::string chk_solution, chk_scenario;
    int chk_skip = 1;
    double chk_resid_tol = 1.0;
    auto* cmd_check = app.add_subcommand("check", "re-certify an exported solution");
    cmd_check->add_option("--solution", chk_solution, "solution csv")->required();
    cmd_check->add_option("--scenario", chk_scenario, "scenario config path")->required();
    cmd_check->add_option("--skip-nodes", chk_skip, "nodes excluded after t=0");
    cmd_check->add_option("--resid-tol", chk_resid_tol, "bound for finite-difference residuals");

    std::string rec_solution, rec_scenario, rec_from, rec_target = "all",
                rec_out = "recovery.csv";
    auto* cmd_recover = app.add_subcommand("recover", "recover SoC trajectories from two classes");
    cmd_recover->add_option("--solution", rec_solution, "solution csv")->required();
    cmd_recover->add_option("--scenario", rec_scenario, "scenario config path")->required();
    cmd_recover->add_option("--from", rec_from, "classA,classB source pair")->required();
    cmd_recover->add_option("--target", rec_target, "target class name or 'all'");
    cmd_recover->add_option("--out", rec_out, "recovery csv path");

    std::string swp_scenario, swp_scheme = "trapezoidal", swp_out;
    std::vector<int> swp_steps;
    double swp_tol = 1e-9;
    auto* cmd_sweep = app.add_subcommand("sweep", "residual refinement study");
    cmd_sweep->add_option("--scenario", swp_scenario, "scenario config path")->required();
    cmd_sweep->add_option("--steps", swp_steps, "comma-separated grid sizes")
        ->required()
        ->delimiter(',');
    cmd_sweep->add_option("--scheme", swp_scheme, "euler|trapezoidal");
    cmd_sweep->add_option("--tol", swp_tol, "KKT residual tolerance");
    cmd_sweep->add_option("--out", swp_out, "write the sweep table as json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    if (cmd_solve->parsed()) return run_solve(solve_args, command_line);
    if (cmd_check->parsed()) return run_check(chk_solution, chk_scenario, chk_skip, chk_resid_tol);
    if (cmd_recover->parsed())
        return run_recover(rec_solution, rec_scenario, rec_from, rec_target, rec_out);
    if (cmd_sweep->parsed())
        return run_sweep(swp_scenario, swp_steps, swp_scheme, swp_tol, swp_out);
    return kExitUsage;
}
