#ifndef EXITGRID_CONFIG_HPP
#define EXITGRID_CONFIG_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "exitgrid/benchmarks.hpp"
#include "exitgrid/problem.hpp"

namespace exitgrid {

using json = nlohmann::json;

namespace detail {

inline std::vector<Vec> parse_controls(const json& j, int m) {
    if (j.is_array()) {
        std::vector<Vec> out;
        for (const auto& row : j) {
            Vec u;
            if (row.is_number())
                u.push_back(row.get<double>());
            else
                for (const auto& v : row) u.push_back(v.get<double>());
            out.push_back(std::move(u));
        }
        return out;
    }
    if (j.is_object()) {
        std::string shape = j.at("shape").get<std::string>();
        int count = j.at("count").get<int>();
        if (count < 1) throw ConfigError("control count must be >= 1");
        if (shape == "interval") {
            if (m != 1) throw ConfigError("interval control shape needs control dimension 1");
            return interval_points(count);
        }
        if (shape == "sphere") {
            if (m == 1) return {{-1.0}, {1.0}};
            if (m == 2) return unit_circle_points(count);
            if (m == 3) return fibonacci_sphere_points(count);
            throw ConfigError("sphere control shape supports control dimension <= 3");
        }
        throw ConfigError("unknown control shape '" + shape + "'");
    }
    throw ConfigError("controls must be a list or a {shape, count} table");
}

}  // namespace detail

/// Builds a problem from a JSON config: either {"builtin": "<NAME>"} or a
/// full description with d, m, f, r, g, h, controls, domain and constants.
inline ControlProblem parse_problem_json(const json& j) {
    if (j.contains("builtin")) return builtin(j.at("builtin").get<std::string>()).problem;

    for (const char* key : {"d", "m", "f", "r", "g", "h", "controls", "domain", "constants"})
        if (!j.contains(key)) throw ConfigError(std::string("problem config is missing field '") + key + "'");

    int d = j.at("d").get<int>();
    int m = j.at("m").get<int>();
    std::vector<Expression> f;
    for (const auto& t : j.at("f")) f.push_back(parse_expression(t.get<std::string>(), d, m));
    Expression r = parse_expression(j.at("r").get<std::string>(), d, m);
    Expression g = parse_expression(j.at("g").get<std::string>(), d, 0);
    Expression h = parse_expression(j.at("h").get<std::string>(), d, 0);

    Box box;
    for (const auto& ax : j.at("domain")) box.axes.push_back({ax.at(0).get<double>(), ax.at(1).get<double>()});

    const auto& kc = j.at("constants");
    ProblemConstants k;
    k.speed_bound = kc.at("N").get<double>();
    k.run_cost_floor = kc.at("r0").get<double>();
    k.terminal_lip = kc.value("G", 0.0);
    k.inner_ball_radius = kc.value("rho0", 1.0);

    ControlProblem p(d, m, std::move(f), std::move(r), std::move(g), std::move(h),
                     detail::parse_controls(j.at("controls"), m), std::move(box), k);

    auto parse_opt = [&](const char* key, int count, int ctrl) {
        std::vector<Expression> out;
        if (j.contains(key)) {
            for (const auto& t : j.at(key)) out.push_back(parse_expression(t.get<std::string>(), d, ctrl));
            if (static_cast<int>(out.size()) != count)
                throw ConfigError(std::string("field '") + key + "' has the wrong number of expressions");
        }
        return out;
    };
    if (auto df = parse_opt("Df", d * d, m); !df.empty()) p.set_dynamics_jacobian(std::move(df));
    if (auto dr = parse_opt("Dr", d, m); !dr.empty()) p.set_running_gradient(std::move(dr));
    if (auto dg = parse_opt("Dg", d, 0); !dg.empty()) p.set_terminal_gradient(std::move(dg));
    if (auto dh = parse_opt("Dh", d, 0); !dh.empty()) p.set_target_gradient(std::move(dh));
    return p;
}

inline ControlProblem parse_problem(const std::string& config_text) {
    json j;
    try {
        j = json::parse(config_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        return parse_problem_json(j);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad problem config: ") + e.what());
    }
}

}  // namespace exitgrid

#endif
