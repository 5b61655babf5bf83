#ifndef EXITGRID_BENCHMARKS_HPP
#define EXITGRID_BENCHMARKS_HPP

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "exitgrid/problem.hpp"
#include "exitgrid/solver.hpp"

namespace exitgrid {

/// A built-in problem, optionally with an analytic value oracle valid on
/// the target complement inside the domain box.
struct Benchmark {
    std::string name;
    ControlProblem problem;
    std::function<double(std::span<const double>)> oracle;  // empty when none
    std::string notes;
    std::vector<int> default_n;
    double band_exclude = 0.0;  // exclude |x2| < band from error norms
};

namespace detail {

inline std::vector<Expression> parse_all(const std::vector<std::string>& texts, int d, int m) {
    std::vector<Expression> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(parse_expression(t, d, m));
    return out;
}

inline std::vector<std::string> zero_matrix(int d) {
    return std::vector<std::string>(static_cast<std::size_t>(d) * d, "0");
}

}  // namespace detail

inline Benchmark builtin(const std::string& name) {
    using detail::parse_all;
    auto mk = [](int d, int m, std::vector<std::string> f, std::string r, std::string g, std::string h,
                 std::vector<Vec> controls, Box box, ProblemConstants k) {
        return ControlProblem(d, m, parse_all(f, d, m), parse_expression(r, d, m), parse_expression(g, d, 0),
                              parse_expression(h, d, 0), std::move(controls), std::move(box), k);
    };

    if (name == "EIK16" || name == "EIK64") {
        int k = name == "EIK16" ? 16 : 64;
        Benchmark b{name,
                    mk(2, 2, {"u1", "u2"}, "1", "0", "x1^2 + x2^2 - 1", unit_circle_points(k),
                       Box{{{-2, 2}, {-2, 2}}}, {1.001, 1.0, 0.0, 1.0}),
                    [](std::span<const double> x) { return norm(x) - 1.0; },
                    "eikonal distance to the unit circle, " + std::to_string(k) + " directions",
                    {161, 161},
                    0.0};
        b.problem.set_dynamics_jacobian(parse_all(detail::zero_matrix(2), 2, 2));
        b.problem.set_running_gradient(parse_all({"0", "0"}, 2, 2));
        b.problem.set_terminal_gradient(parse_all({"0", "0"}, 2, 0));
        b.problem.set_target_gradient(parse_all({"2*x1", "2*x2"}, 2, 0));
        return b;
    }
    if (name == "EXA") {
        Benchmark b{"EXA",
                    mk(2, 1, {"u1", "0"}, "1", "0", "x2 - (x1^2 - 1)^3", interval_points(11),
                       Box{{{-2, 2}, {-0.5, 1.5}}}, {1.001, 1.0, 0.0, 0.1}),
                    [](std::span<const double> x) {
                        return std::sqrt(1.0 + real_cbrt(x[1])) - std::fabs(x[0]);
                    },
                    "double-well target; the value is non-Lipschitz on the segment {x2=0, |x1|<1}",
                    {201, 171},
                    0.1};
        b.problem.set_dynamics_jacobian(parse_all(detail::zero_matrix(2), 2, 1));
        b.problem.set_running_gradient(parse_all({"0", "0"}, 2, 1));
        b.problem.set_terminal_gradient(parse_all({"0", "0"}, 2, 0));
        b.problem.set_target_gradient(parse_all({"-6*x1*(x1^2 - 1)^2", "1"}, 2, 0));
        return b;
    }
    if (name == "EXB") {
        Benchmark b{"EXB",
                    mk(2, 1, {"u1", "0"}, "1", "0", "x2 - x1*cbrt(x1^2)", interval_points(11),
                       Box{{{-2, 2}, {-1, 1}}}, {1.001, 1.0, 0.0, 0.05}),
                    [](std::span<const double> x) {
                        double c = x[1] == 0.0 ? 0.0 : (x[1] > 0 ? std::pow(x[1], 0.6) : -std::pow(-x[1], 0.6));
                        return c - x[0];
                    },
                    "5/3-power target; horizontal constant controls are not optimal from (-1,0)",
                    {201, 101},
                    0.1};
        b.problem.set_dynamics_jacobian(parse_all(detail::zero_matrix(2), 2, 1));
        b.problem.set_running_gradient(parse_all({"0", "0"}, 2, 1));
        b.problem.set_terminal_gradient(parse_all({"0", "0"}, 2, 0));
        b.problem.set_target_gradient(parse_all({"-(5/3)*cbrt(x1^2)", "1"}, 2, 0));
        return b;
    }
    if (name == "GEN") {
        Benchmark b{"GEN",
                    mk(2, 2, {"u1", "u2"}, "1 + x1^2", "0.1*x1", "x1^2 + x2^2 - 1", unit_circle_points(16),
                       Box{{{-2, 2}, {-2, 2}}}, {1.001, 1.0, 0.1, 1.0}),
                    nullptr,
                    "state-dependent running cost and nonzero terminal cost on the disk target",
                    {161, 161},
                    0.0};
        b.problem.set_dynamics_jacobian(parse_all(detail::zero_matrix(2), 2, 2));
        b.problem.set_running_gradient(parse_all({"2*x1", "0"}, 2, 2));
        b.problem.set_terminal_gradient(parse_all({"0.1", "0"}, 2, 0));
        b.problem.set_target_gradient(parse_all({"2*x1", "2*x2"}, 2, 0));
        return b;
    }
    if (name == "RGEN") {
        Benchmark b{"RGEN",
                    mk(2, 1, {"u1", "-0.2"}, "1", "0", "x2 - (x1^2 - 1)^3", interval_points(11),
                       Box{{{-2, 2}, {-0.5, 1.5}}}, {1.05, 1.0, 0.0, 0.1}),
                    nullptr,
                    "EXA target with a downward drift; every boundary normal is transversal",
                    {201, 171},
                    0.0};
        b.problem.set_dynamics_jacobian(parse_all(detail::zero_matrix(2), 2, 1));
        b.problem.set_running_gradient(parse_all({"0", "0"}, 2, 1));
        b.problem.set_terminal_gradient(parse_all({"0", "0"}, 2, 0));
        b.problem.set_target_gradient(parse_all({"-6*x1*(x1^2 - 1)^2", "1"}, 2, 0));
        return b;
    }
    throw ConfigError("unknown builtin problem '" + name + "'");
}

struct ConvergenceRow {
    std::vector<int> n;
    std::size_t nodes = 0;
    double linf = 0.0;
    double l1 = 0.0;
    int sweeps = 0;
    double seconds = 0.0;
};

struct BenchmarkOptions {
    SolveOptions solve;
    int collar = 3;  // nodes around the target excluded from error norms
};

/// Error norms of a solved field against the benchmark oracle, excluding
/// the target collar, unreached nodes, and the benchmark's |x2| band.
inline std::pair<double, double> oracle_error(const Benchmark& b, const ValueField& field, int collar = 3) {
    if (!b.oracle) throw ConfigError("benchmark " + b.name + " has no analytic oracle");
    const Grid& g = field.grid;
    std::vector<std::uint8_t> seed(field.value.size(), 0);
    for (std::size_t i = 0; i < seed.size(); ++i)
        if (field.status[i] != NodeStatus::Converged) seed[i] = 1;
    auto excl = dilate_mask(g, seed, collar);
    std::vector<int> mi(g.dim());
    Vec x(g.dim());
    double linf = 0.0, sum = 0.0;
    std::size_t count = 0;
    for (std::size_t flat = 0; flat < field.value.size(); ++flat) {
        if (excl[flat]) continue;
        g.unindex(flat, mi);
        g.node(mi, x);
        if (b.band_exclude > 0.0 && g.dim() >= 2 && std::fabs(x[1]) < b.band_exclude) continue;
        double err = std::fabs(field.value[flat] - b.oracle(x));
        linf = std::max(linf, err);
        sum += err;
        ++count;
    }
    return {linf, count ? sum / double(count) : 0.0};
}

/// Solves the benchmark at each resolution and tabulates errors against
/// the oracle. A scalar resolution applies to every axis.
inline std::vector<ConvergenceRow> run_benchmark(const Benchmark& b, const std::vector<std::vector<int>>& resolutions,
                                                 BenchmarkOptions opts = {}) {
    std::vector<ConvergenceRow> rows;
    for (const auto& res : resolutions) {
        std::vector<int> n = res;
        if (static_cast<int>(n.size()) == 1) n.assign(b.problem.dim(), res[0]);
        Grid grid = build_grid(b.problem.domain(), n);
        ValueField field = solve_value(b.problem, grid, opts.solve);
        ConvergenceRow row;
        row.n = n;
        row.nodes = grid.size();
        row.sweeps = field.sweeps_used;
        row.seconds = field.solve_seconds;
        auto [linf, l1] = oracle_error(b, field, opts.collar);
        row.linf = linf;
        row.l1 = l1;
        rows.push_back(row);
    }
    return rows;
}

}  // namespace exitgrid

#endif
