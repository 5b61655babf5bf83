// exitgrid: solve exit-time control problems on a grid and run the
// structure diagnostics (extremal arcs, synthesis, singular-set detection,
// boundary sweeps, convergence benchmarks).

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "exitgrid/exitgrid.hpp"

namespace fs = std::filesystem;
using namespace exitgrid;

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 1;
    std::vector<int> grid_override;
    bool quiet = false;
};

json load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return j;
}

ControlProblem problem_from_config(const json& cfg) {
    if (!cfg.contains("problem")) throw ConfigError("config is missing the 'problem' table");
    return parse_problem_json(cfg.at("problem"));
}

std::vector<int> grid_counts(const json& cfg, const CliOptions& cli, int dim) {
    std::vector<int> n;
    if (!cli.grid_override.empty())
        n = cli.grid_override;
    else if (cfg.contains("grid") && cfg.at("grid").contains("n"))
        n = cfg.at("grid").at("n").get<std::vector<int>>();
    else
        throw ConfigError("no grid sizes: provide grid.n in the config or --grid");
    if (static_cast<int>(n.size()) == 1) n.assign(dim, n[0]);
    if (static_cast<int>(n.size()) != dim) throw ConfigError("grid.n does not match the state dimension");
    return n;
}

SolveOptions solver_options(const json& cfg) {
    SolveOptions o;
    if (cfg.contains("solver")) {
        const auto& s = cfg.at("solver");
        o.tol = s.value("tol", o.tol);
        o.max_sweeps = s.value("max_sweeps", o.max_sweeps);
        o.cfl = s.value("cfl", o.cfl);
        o.jacobi = s.value("jacobi", false);
    }
    o.threads = worker_count();
    return o;
}

void write_run_log(const CliOptions& cli, const std::string& command, double seconds) {
    auto os = std::ofstream(fs::path(cli.out_dir) / "run.log", std::ios::app);
    std::time_t now = std::time(nullptr);
    char stamp[64];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
    os << stamp << " command=" << command << " config=" << cli.config_path << " seed=" << cli.seed
       << " seconds=" << seconds << "\n";
}

ValueField solve_from_config(const ControlProblem& p, const json& cfg, const CliOptions& cli) {
    Grid grid = build_grid(p.domain(), grid_counts(cfg, cli, p.dim()));
    return solve_value(p, grid, solver_options(cfg));
}

int cmd_solve(const json& cfg, const CliOptions& cli) {
    ControlProblem p = problem_from_config(cfg);
    ValueField field = solve_from_config(p, cfg, cli);
    fs::path out(cli.out_dir);
    write_field_csv(field, (out / "field.csv").string());
    write_field_gnuplot(field, "field.csv", (out / "field.gp").string());
    if (cfg.contains("export") && cfg.at("export").value("binary", false))
        write_field_exgf(field, (out / "field.exgf").string());
    auto res = hjb_residual_field(p, field);
    json rj;
    rj["linf"] = res.linf;
    rj["l1"] = res.l1;
    rj["sweeps"] = field.sweeps_used;
    rj["final_change"] = field.final_change;
    std::size_t unreached = 0, target = 0;
    for (auto s : field.status) {
        unreached += s == NodeStatus::Unreached;
        target += s == NodeStatus::Target;
    }
    rj["unreached_nodes"] = unreached;
    rj["target_nodes"] = target;
    write_json(rj, (out / "residuals.json").string());
    write_run_log(cli, "solve", field.solve_seconds);
    if (!cli.quiet)
        std::cout << "solved " << field.value.size() << " nodes in " << field.sweeps_used
                  << " sweeps; residual linf=" << res.linf << "\n";
    return 0;
}

int cmd_extremal(const json& cfg, const CliOptions& cli) {
    ControlProblem p = problem_from_config(cfg);
    if (!cfg.contains("extremal")) throw ConfigError("config is missing the 'extremal' table");
    const auto& e = cfg.at("extremal");
    Vec x = e.at("x").get<Vec>();
    double T = e.at("T").get<double>();
    double step = e.value("step", 1e-3);
    BoundaryPoint bp = project_to_boundary(p, x);
    TerminalData td = terminal_from_boundary(p, bp);
    ExtremalArc arc;
    if (td.cls == BoundaryClass::N0) {
        std::optional<int> tie;
        if (e.contains("tie_break") && !e.at("tie_break").is_null()) tie = e.at("tie_break").get<int>();
        arc = backward_horizontal(p, td, T, step, tie);
    } else {
        arc = backward_extremal(p, td, T, step);
    }
    fs::path out(cli.out_dir);
    write_arc_csv(p, arc, (out / "arc.csv").string());
    auto mp = check_maximum_principle(p, arc);
    json mj;
    mj["kind"] = arc.kind == ArcKind::Horizontal ? "HORIZONTAL" : "NONHORIZONTAL";
    mj["max_residual"] = mp.max_residual;
    mj["degenerate_fan"] = arc.degenerate_fan;
    mj["terminal"] = {{"x", td.x}, {"normal", td.normal}, {"class", to_string(td.cls)},
                      {"lambda", td.lambda}, {"pstar", td.pstar}};
    write_json(mj, (out / "mp_residuals.json").string());
    write_run_log(cli, "extremal", 0.0);
    if (!cli.quiet)
        std::cout << "arc with " << arc.t.size() << " nodes, class " << to_string(td.cls)
                  << ", max residual " << mp.max_residual << "\n";
    return 0;
}

int cmd_synthesize(const json& cfg, const CliOptions& cli) {
    ControlProblem p = problem_from_config(cfg);
    ValueField field = solve_from_config(p, cfg, cli);
    if (!cfg.contains("synthesize")) throw ConfigError("config is missing the 'synthesize' table");
    const auto& s = cfg.at("synthesize");
    double step = s.value("step", 0.25 * field.grid.min_spacing() / p.constants().speed_bound);
    int budget = s.value("budget", 400000);
    fs::path out(cli.out_dir);
    json table = json::array();
    int idx = 0;
    for (const auto& row : s.at("x0")) {
        Vec x0 = row.get<Vec>();
        Trajectory traj = forward_synthesis(p, field, x0, step, budget);
        char name[32];
        std::snprintf(name, sizeof name, "traj_%03d.csv", idx);
        write_trajectory_csv(traj, (out / name).string());
        double v0 = interpolate(field, x0);
        auto cert = certify_optimality(p, field, traj, nullptr);
        table.push_back({{"x0", x0},
                         {"cost", traj.cost},
                         {"value", v0},
                         {"gap", traj.cost - v0},
                         {"exit", traj.exit},
                         {"verdict", to_string(cert.verdict)}});
        ++idx;
    }
    write_json(table, (out / "cost_vs_value.json").string());
    write_run_log(cli, "synthesize", field.solve_seconds);
    if (!cli.quiet) std::cout << "synthesized " << idx << " trajectories\n";
    return 0;
}

int cmd_diagnose(const json& cfg, const CliOptions& cli) {
    ControlProblem p = problem_from_config(cfg);
    ValueField field = solve_from_config(p, cfg, cli);
    std::vector<Vec> points;
    if (cfg.contains("diagnose") && cfg.at("diagnose").contains("points"))
        for (const auto& row : cfg.at("diagnose").at("points")) points.push_back(row.get<Vec>());
    RegularityReport rep = diagnose(p, field, points);
    fs::path out(cli.out_dir);
    write_json(report_to_json(rep), (out / "report.json").string());
    write_masks_csv(field, rep.sigma_mask, rep.sigma_inf_mask, (out / "masks.csv").string());
    write_run_log(cli, "diagnose", field.solve_seconds);
    if (!cli.quiet)
        std::cout << "diagnosed " << points.size() << " points; sigma_inf fraction "
                  << rep.sigma_inf_area_fraction << "\n";
    return 0;
}

int cmd_sweep(const json& cfg, const CliOptions& cli) {
    ControlProblem p = problem_from_config(cfg);
    int samples = 200;
    double T = 1.0, step = 1e-3;
    if (cfg.contains("sweep")) {
        const auto& s = cfg.at("sweep");
        samples = s.value("samples", samples);
        T = s.value("T", T);
        step = s.value("step", step);
    }
    auto boundary = sample_boundary(p, samples);
    auto sweep = sweep_singular_set(p, boundary, T, step);
    fs::path out(cli.out_dir);
    write_boundary_csv(boundary, (out / "boundary.csv").string());
    write_polylines_csv(sweep, p.dim(), (out / "sweep.csv").string());
    write_run_log(cli, "sweep", 0.0);
    if (!cli.quiet)
        std::cout << sweep.curves.size() << " curves, " << sweep.degenerate_points.size()
                  << " degenerate points from " << boundary.size() << " boundary samples\n";
    return 0;
}

int cmd_bench(const json& cfg, const CliOptions& cli) {
    if (!cfg.contains("bench")) throw ConfigError("config is missing the 'bench' table");
    const auto& b = cfg.at("bench");
    BenchmarkOptions opts;
    opts.solve = solver_options(cfg);
    fs::path out(cli.out_dir);
    for (const auto& name : b.at("names")) {
        Benchmark bench = builtin(name.get<std::string>());
        std::vector<std::vector<int>> resolutions;
        for (const auto& r : b.at("resolutions"))
            resolutions.push_back(r.is_number() ? std::vector<int>{r.get<int>()} : r.get<std::vector<int>>());
        auto rows = run_benchmark(bench, resolutions, opts);
        write_convergence_csv(rows, (out / ("convergence_" + bench.name + ".csv")).string());
        double total = 0;
        for (const auto& row : rows) total += row.seconds;
        write_run_log(cli, "bench " + bench.name, total);
        if (!cli.quiet)
            for (const auto& row : rows)
                std::cout << bench.name << " n=" << row.n[0] << " linf=" << row.linf << " l1=" << row.l1
                          << " sweeps=" << row.sweeps << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exit-time control grid solver and structure diagnostics"};
    app.require_subcommand(1);
    CliOptions cli;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", cli.config_path, "JSON config file")->required();
        sub->add_option("--out", cli.out_dir, "output directory");
        sub->add_option("--seed", cli.seed, "RNG seed");
        sub->add_option("--grid", cli.grid_override, "node counts n1,n2[,n3]")->delimiter(',');
        sub->add_flag("--quiet", cli.quiet, "suppress progress output");
    };
    CLI::App* solve = app.add_subcommand("solve", "solve the value function and export the field");
    CLI::App* extremal = app.add_subcommand("extremal", "integrate a backward extremal arc");
    CLI::App* synthesize = app.add_subcommand("synthesize", "forward feedback trajectories from the field");
    CLI::App* diagnose = app.add_subcommand("diagnose", "singular-set masks and per-point structure report");
    CLI::App* sweep = app.add_subcommand("sweep", "horizontal characteristics from tangential boundary points");
    CLI::App* bench = app.add_subcommand("bench", "convergence tables against analytic oracles");
    for (CLI::App* sub : {solve, extremal, synthesize, diagnose, sweep, bench}) add_common(sub);

    CLI11_PARSE(app, argc, argv);

    try {
        fs::create_directories(cli.out_dir);
        json cfg = load_config(cli.config_path);
        if (solve->parsed()) return cmd_solve(cfg, cli);
        if (extremal->parsed()) return cmd_extremal(cfg, cli);
        if (synthesize->parsed()) return cmd_synthesize(cfg, cli);
        if (diagnose->parsed()) return cmd_diagnose(cfg, cli);
        if (sweep->parsed()) return cmd_sweep(cfg, cli);
        if (bench->parsed()) return cmd_bench(cfg, cli);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const GridError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
