#ifndef EXITGRID_ARCS_HPP
#define EXITGRID_ARCS_HPP

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "exitgrid/geometry.hpp"
#include "exitgrid/grid.hpp"
#include "exitgrid/hamiltonian.hpp"
#include "exitgrid/problem.hpp"

namespace exitgrid {

enum class ArcKind { NonHorizontal, Horizontal };

/// Terminal data for a backward extremal: boundary point, unit proximal
/// normal, transversality class, and the terminal costate. For transversal
/// (N1) exits p* = q* - lambda xi with H(x*, p*) = 0; for tangential (N0)
/// exits p* = -xi.
struct TerminalData {
    Vec x;
    Vec normal;
    BoundaryClass cls = BoundaryClass::N1;
    Vec qstar;
    double lambda = 0.0;
    Vec pstar;
};

inline TerminalData terminal_from_boundary(const ControlProblem& p, const BoundaryPoint& bp) {
    TerminalData td;
    td.x = bp.x;
    td.normal = bp.normal;
    td.cls = bp.cls;
    if (bp.cls == BoundaryClass::N1) {
        td.qstar = p.eval_terminal_gradient(bp.x);
        td.lambda = solve_terminal_multiplier(p, bp.x, bp.normal, td.qstar);
        td.pstar = td.qstar;
        axpy(-td.lambda, td.normal, td.pstar);
    } else {
        td.qstar.assign(p.dim(), 0.0);
        td.pstar = scaled(td.normal, -1.0);
    }
    return td;
}

/// Backward characteristic arc: time mesh on [0, T] with the terminal point
/// at t = T, states, costates, the control chosen at each mesh node, and
/// per-step tie flags.
struct ExtremalArc {
    ArcKind kind = ArcKind::NonHorizontal;
    std::vector<double> t;
    std::vector<Vec> y;
    std::vector<Vec> p;
    std::vector<int> u_index;
    std::vector<std::uint8_t> degenerate;  // per node: argmax tie during the adjacent step
    bool degenerate_fan = false;           // every control tied in -p.f
    TerminalData terminal;
};

namespace detail {

/// Argmax of vals with lexicographically smallest control on ties.
inline int pick_control(const ControlProblem& p, const std::vector<double>& vals, double tie_tol,
                        bool* tied, bool* all_tied) {
    double best = vals[0];
    for (double v : vals) best = std::max(best, v);
    int pick = -1;
    int n_tied = 0;
    for (std::size_t k = 0; k < vals.size(); ++k) {
        if (vals[k] >= best - tie_tol) {
            ++n_tied;
            if (pick < 0 || p.controls()[k] < p.controls()[pick]) pick = static_cast<int>(k);
        }
    }
    if (tied) *tied = n_tied > 1;
    if (all_tied) *all_tied = n_tied == static_cast<int>(vals.size());
    return pick;
}

struct StageField {
    Vec dy, dp;
    bool tied = false;
    bool all_tied = false;
    int u = 0;
};

inline StageField characteristic_field(const ControlProblem& p, std::span<const double> y,
                                       std::span<const double> pp, bool horizontal,
                                       std::optional<int> tie_break) {
    const int d = p.dim();
    StageField out;
    out.dy.assign(d, 0.0);
    out.dp.assign(d, 0.0);
    Vec f(d);
    std::vector<double> vals(p.controls().size());
    for (std::size_t k = 0; k < p.controls().size(); ++k) {
        p.eval_dynamics(y, p.controls()[k], f);
        vals[k] = -dot(pp, f);
        if (!horizontal) vals[k] -= p.eval_running_cost(y, p.controls()[k]);
    }
    bool tied = false, all_tied = false;
    int u = pick_control(p, vals, kTieTol, &tied, &all_tied);
    out.tied = tied;
    out.all_tied = all_tied;
    if (horizontal && all_tied) {
        if (tie_break)
            u = *tie_break;
        else
            return out;  // degenerate fan: zero motion
    }
    out.u = u;
    p.eval_dynamics(y, p.controls()[u], out.dy);
    Vec jac = p.eval_dynamics_jacobian(y, p.controls()[u]);
    for (int i = 0; i < d; ++i) {
        double s = 0.0;
        for (int r = 0; r < d; ++r) s += jac[static_cast<std::size_t>(r) * d + i] * pp[r];
        out.dp[i] = -s;
    }
    if (!horizontal) {
        Vec gr = p.eval_running_gradient(y, p.controls()[u]);
        for (int i = 0; i < d; ++i) out.dp[i] -= gr[i];
    }
    return out;
}

inline ExtremalArc integrate_backward(const ControlProblem& p, const TerminalData& td, double T, double dt,
                                      bool horizontal, std::optional<int> tie_break) {
    const int d = p.dim();
    ExtremalArc arc;
    arc.kind = horizontal ? ArcKind::Horizontal : ArcKind::NonHorizontal;
    arc.terminal = td;
    int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
    if (T <= 0.0) steps = 0;
    double h = steps > 0 ? T / steps : 0.0;
    arc.t.resize(steps + 1);
    arc.y.assign(steps + 1, Vec(d));
    arc.p.assign(steps + 1, Vec(d));
    arc.u_index.assign(steps + 1, 0);
    arc.degenerate.assign(steps + 1, 0);
    for (int k = 0; k <= steps; ++k) arc.t[k] = k * h;
    arc.y[steps] = td.x;
    arc.p[steps] = td.pstar;

    Vec y = td.x, pp = td.pstar;
    auto record = [&](int k) {
        StageField sf = characteristic_field(p, y, pp, horizontal, tie_break);
        arc.u_index[k] = sf.u;
        if (sf.tied) arc.degenerate[k] = 1;
        if (sf.all_tied) arc.degenerate_fan = true;
    };
    record(steps);
    Vec y1(d), p1(d);
    for (int k = steps; k >= 1; --k) {
        // classical RK4 with step -h; controls recomputed at every stage
        auto f1 = characteristic_field(p, y, pp, horizontal, tie_break);
        y1 = y;
        p1 = pp;
        axpy(-0.5 * h, f1.dy, y1);
        axpy(-0.5 * h, f1.dp, p1);
        auto f2 = characteristic_field(p, y1, p1, horizontal, tie_break);
        y1 = y;
        p1 = pp;
        axpy(-0.5 * h, f2.dy, y1);
        axpy(-0.5 * h, f2.dp, p1);
        auto f3 = characteristic_field(p, y1, p1, horizontal, tie_break);
        y1 = y;
        p1 = pp;
        axpy(-h, f3.dy, y1);
        axpy(-h, f3.dp, p1);
        auto f4 = characteristic_field(p, y1, p1, horizontal, tie_break);
        for (int i = 0; i < d; ++i) {
            y[i] -= h / 6.0 * (f1.dy[i] + 2.0 * f2.dy[i] + 2.0 * f3.dy[i] + f4.dy[i]);
            pp[i] -= h / 6.0 * (f1.dp[i] + 2.0 * f2.dp[i] + 2.0 * f3.dp[i] + f4.dp[i]);
        }
        if (f1.tied || f2.tied || f3.tied || f4.tied) arc.degenerate[k - 1] = 1;
        if (!p.domain().contains(y, 1e-9 * p.domain().diameter()))
            throw NumericalError("state exited the domain box during arc integration");
        if (norm(pp) < 1e-14) throw NumericalError("degenerate costate: p(t) vanished along the arc");
        arc.y[k - 1] = y;
        arc.p[k - 1] = pp;
        record(k - 1);
    }
    return arc;
}

}  // namespace detail

/// Backward non-horizontal extremal from transversal terminal data:
///   y' = f(y,u),  p' = -Dxf(y,u)^T p - Dxr(y,u),  u = argmax(-p.f - r),
/// integrated from t = T down to 0 by fixed-step RK4.
inline ExtremalArc backward_extremal(const ControlProblem& p, const TerminalData& td, double T, double dt) {
    if (td.cls != BoundaryClass::N1) throw NumericalError("backward_extremal needs transversal (N1) terminal data");
    if (std::fabs(hamiltonian(p, td.x, td.pstar).value) > 1e-10)
        throw NumericalError("terminal data inconsistent: |H(x*, p*)| > 1e-10");
    return detail::integrate_backward(p, td, T, dt, false, std::nullopt);
}

/// Backward horizontal arc from tangential terminal data:
///   y' = f(y,u),  p' = -Dxf(y,u)^T p,  u = argmax(-p.f),  p(T) = -xi.
/// When every control ties in -p.f and no tie-break index is supplied, the
/// arc degenerates to zero motion and is flagged as a fan.
inline ExtremalArc backward_horizontal(const ControlProblem& p, const TerminalData& td, double T, double dt,
                                       std::optional<int> tie_break = std::nullopt) {
    if (td.cls != BoundaryClass::N0) throw NumericalError("tangential normal required: terminal class must be N0");
    return detail::integrate_backward(p, td, T, dt, true, tie_break);
}

/// Forward trajectory from greedy dynamic-programming feedback on a solved
/// field, with Euler steps and a bisected final step onto {h = 0}.
struct Trajectory {
    std::vector<double> t;
    std::vector<Vec> y;
    std::vector<int> u_index;
    double cost = 0.0;
    Vec exit;
    bool reached = false;
};

namespace detail {

inline int feedback_control(const ControlProblem& p, const ValueField& field, std::span<const double> y,
                            double dt, std::vector<double>* objectives = nullptr) {
    const int d = p.dim();
    Vec f(d), foot(d);
    double best = std::numeric_limits<double>::infinity();
    int pick = -1;
    if (objectives) objectives->assign(p.controls().size(), std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < p.controls().size(); ++k) {
        p.eval_dynamics(y, p.controls()[k], f);
        for (int i = 0; i < d; ++i) foot[i] = y[i] + dt * f[i];
        bool outside = false;
        double iv = detail::interp_raw(field.grid, field.value, foot, outside);
        double obj = outside ? kBig : dt * p.eval_running_cost(y, p.controls()[k]) + iv;
        if (objectives) (*objectives)[k] = obj;
        if (obj < best) {
            best = obj;
            pick = static_cast<int>(k);
        }
    }
    if (pick < 0 || best >= kBig / 2) throw NumericalError("feedback synthesis: no admissible step");
    return pick;
}

inline Trajectory synthesize_core(const ControlProblem& p, const ValueField& field, std::span<const double> x0,
                                  double dt, int budget, std::optional<int> first_control) {
    const int d = p.dim();
    Trajectory traj;
    Vec y(x0.begin(), x0.end());
    traj.t.push_back(0.0);
    traj.y.push_back(y);
    if (p.eval_target_level(y) <= 0.0) {
        traj.exit = y;
        traj.cost = p.eval_terminal_cost(y);
        traj.reached = true;
        traj.u_index.push_back(0);
        return traj;
    }
    bool outside_v = false;
    double v0 = detail::interp_raw(field.grid, field.value, y, outside_v);
    if (outside_v || v0 >= kBig / 2) throw NumericalError("synthesis start point is outside the controllable region");

    Vec f(d), ynew(d);
    double time = 0.0;
    for (int step = 0; step < budget; ++step) {
        int u = (step == 0 && first_control) ? *first_control : feedback_control(p, field, y, dt);
        p.eval_dynamics(y, p.controls()[u], f);
        ynew = y;
        axpy(dt, f, ynew);
        double hn = p.eval_target_level(ynew);
        traj.u_index.push_back(u);
        if (hn <= 0.0) {
            // bisect the crossing time along the frozen-control segment
            double lo = 0.0, hi = dt;
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (lo + hi);
                Vec ym = y;
                axpy(mid, f, ym);
                double hm = p.eval_target_level(ym);
                if (hm <= 0.0)
                    hi = mid;
                else
                    lo = mid;
                if (std::fabs(hm) <= 1e-8 && hi - lo <= 1e-12 * std::max(1.0, dt)) break;
            }
            double tstar = hi;
            Vec yexit = y;
            axpy(tstar, f, yexit);
            traj.cost += tstar * p.eval_running_cost(y, p.controls()[u]);
            time += tstar;
            traj.t.push_back(time);
            traj.y.push_back(yexit);
            traj.exit = yexit;
            traj.cost += p.eval_terminal_cost(yexit);
            traj.reached = true;
            return traj;
        }
        traj.cost += dt * p.eval_running_cost(y, p.controls()[u]);
        time += dt;
        y = ynew;
        traj.t.push_back(time);
        traj.y.push_back(y);
    }
    throw NumericalError("synthesis step budget exceeded before reaching the target");
}

}  // namespace detail

inline Trajectory forward_synthesis(const ControlProblem& p, const ValueField& field, std::span<const double> x0,
                                    double dt, int budget = 200000) {
    return detail::synthesize_core(p, field, x0, dt, budget, std::nullopt);
}

/// Branching synthesis: one trajectory per near-tied feedback choice at
/// t = 0 whose dynamics image is distinct, capped at max_branches.
inline std::vector<Trajectory> forward_synthesis_branched(const ControlProblem& p, const ValueField& field,
                                                          std::span<const double> x0, double dt,
                                                          int budget = 200000, int max_branches = 8,
                                                          double tie_tol = 1e-6) {
    std::vector<double> objectives;
    detail::feedback_control(p, field, x0, dt, &objectives);
    double best = *std::min_element(objectives.begin(), objectives.end());
    std::vector<int> picks;
    std::vector<Vec> images;
    for (std::size_t k = 0; k < objectives.size(); ++k) {
        if (objectives[k] > best + tie_tol * (1.0 + std::fabs(best))) continue;
        Vec f = p.eval_dynamics(x0, p.controls()[k]);
        bool dup = false;
        for (const auto& img : images)
            if (dist(img, f) < 1e-12) dup = true;
        if (dup) continue;
        picks.push_back(static_cast<int>(k));
        images.push_back(std::move(f));
        if (static_cast<int>(picks.size()) >= max_branches) break;
    }
    std::vector<Trajectory> out;
    for (int k : picks) out.push_back(detail::synthesize_core(p, field, x0, dt, budget, k));
    return out;
}

/// Transported proximal normals at x: terminal costates of each synthesized
/// branch carried back along the stored trajectory by the adjoint equation,
/// with (N1) or without (N0) the running-cost source term.
struct TransportedNormals {
    std::vector<Vec> n1;  // costates p(0) from transversal exits
    std::vector<Vec> n0;  // unit costates p(0)/|p(0)| from tangential exits
    std::vector<Trajectory> trajectories;
};

namespace detail {

/// Integrates p' = -Dxf(y(t),u(t))^T p [- Dxr] backward along a stored
/// trajectory, with the state linearly interpolated between mesh nodes.
inline Vec transport_adjoint(const ControlProblem& p, const Trajectory& traj, const Vec& p_terminal,
                             bool with_run_cost) {
    const int d = p.dim();
    Vec pp = p_terminal;
    auto rhs = [&](const Vec& y, const Vec& q, int u_idx, Vec& out) {
        Vec jac = p.eval_dynamics_jacobian(y, p.controls()[u_idx]);
        for (int i = 0; i < d; ++i) {
            double s = 0.0;
            for (int r = 0; r < d; ++r) s += jac[static_cast<std::size_t>(r) * d + i] * q[r];
            out[i] = -s;
        }
        if (with_run_cost) {
            Vec gr = p.eval_running_gradient(y, p.controls()[u_idx]);
            for (int i = 0; i < d; ++i) out[i] -= gr[i];
        }
    };
    Vec k1(d), k2(d), k3(d), k4(d), q1(d), ymid(d);
    for (int k = static_cast<int>(traj.y.size()) - 1; k >= 1; --k) {
        double h = traj.t[k] - traj.t[k - 1];
        if (h <= 0.0) continue;
        int u = traj.u_index[k - 1];
        const Vec& ya = traj.y[k];
        const Vec& yb = traj.y[k - 1];
        for (int i = 0; i < d; ++i) ymid[i] = 0.5 * (ya[i] + yb[i]);
        rhs(ya, pp, u, k1);
        q1 = pp;
        axpy(-0.5 * h, k1, q1);
        rhs(ymid, q1, u, k2);
        q1 = pp;
        axpy(-0.5 * h, k2, q1);
        rhs(ymid, q1, u, k3);
        q1 = pp;
        axpy(-h, k3, q1);
        rhs(yb, q1, u, k4);
        for (int i = 0; i < d; ++i) pp[i] -= h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return pp;
}

}  // namespace detail

struct TransportOptions {
    double dt = 0.0;  // 0 = half the min grid spacing
    int budget = 400000;
    int max_branches = 8;
    double branch_tol = 1e-6;
};

inline TransportedNormals transported_normals(const ControlProblem& p, const ValueField& field,
                                              std::span<const double> x, TransportOptions opts = {}) {
    double dt = opts.dt > 0.0 ? opts.dt : 0.5 * field.grid.min_spacing() / p.constants().speed_bound;
    TransportedNormals out;
    out.trajectories = forward_synthesis_branched(p, field, x, dt, opts.budget, opts.max_branches, opts.branch_tol);
    for (const auto& traj : out.trajectories) {
        if (!traj.reached) continue;
        BoundaryPoint bp = project_to_boundary(p, traj.exit);
        if (bp.cls == BoundaryClass::N1) {
            TerminalData td = terminal_from_boundary(p, bp);
            out.n1.push_back(detail::transport_adjoint(p, traj, td.pstar, true));
        } else if (bp.cls == BoundaryClass::N0) {
            Vec pt = scaled(bp.normal, -1.0);
            Vec p0 = detail::transport_adjoint(p, traj, pt, false);
            double n = norm(p0);
            if (n > 1e-14) out.n0.push_back(scaled(p0, 1.0 / n));
        }
    }
    return out;
}

/// Residuals of the maximum principle along an arc: |H(y,p)| for
/// non-horizontal arcs, |H0(y,p)| for horizontal ones.
struct MaximumPrincipleResult {
    double max_residual = 0.0;
    std::vector<double> per_step;
};

inline MaximumPrincipleResult check_maximum_principle(const ControlProblem& p, const ExtremalArc& arc) {
    MaximumPrincipleResult res;
    res.per_step.resize(arc.t.size());
    for (std::size_t k = 0; k < arc.t.size(); ++k) {
        double v = arc.kind == ArcKind::NonHorizontal ? hamiltonian(p, arc.y[k], arc.p[k]).value
                                                      : horizontal_hamiltonian(p, arc.y[k], arc.p[k]).value;
        res.per_step[k] = std::fabs(v);
        res.max_residual = std::max(res.max_residual, res.per_step[k]);
    }
    return res;
}

struct InequalityCheck {
    bool holds = false;
    double worst = 0.0;  // max violation; <= 0 means the inequality held everywhere
};

namespace detail {

template <typename F>
void for_nodes_in_ball(const Grid& g, std::span<const double> x, double radius, F&& fn) {
    const int d = g.dim();
    std::vector<int> lo(d), hi(d), mi(d);
    for (int i = 0; i < d; ++i) {
        lo[i] = std::max(0, static_cast<int>(std::ceil((x[i] - radius - g.box.lo(i)) / g.dx[i])));
        hi[i] = std::min(g.n[i] - 1, static_cast<int>(std::floor((x[i] + radius - g.box.lo(i)) / g.dx[i])));
        if (lo[i] > hi[i]) return;
        mi[i] = lo[i];
    }
    Vec z(d);
    for (;;) {
        g.node(mi, z);
        if (dist(z, x) <= radius) fn(g.index(mi), z);
        int axis = d - 1;
        while (axis >= 0) {
            if (++mi[axis] <= hi[axis]) break;
            mi[axis] = lo[axis];
            --axis;
        }
        if (axis < 0) break;
    }
}

}  // namespace detail

/// Checks V(z) <= V(x) + q.(z-x) + sigma |z-x|^2 at grid nodes in the ball.
inline InequalityCheck verify_supergradient(const ValueField& field, std::span<const double> x,
                                            std::span<const double> q, double sigma, double radius) {
    double vx = interpolate(field, x);
    InequalityCheck res;
    res.worst = -std::numeric_limits<double>::infinity();
    detail::for_nodes_in_ball(field.grid, x, radius, [&](std::size_t flat, const Vec& z) {
        if (field.status[flat] == NodeStatus::Unreached) return;
        double lhs = field.value[flat] - vx - dot(q, sub(z, x)) - sigma * norm2(sub(z, x));
        res.worst = std::max(res.worst, lhs);
    });
    if (!std::isfinite(res.worst)) res.worst = 0.0;  // empty ball
    res.holds = res.worst <= 1e-9 * (1.0 + std::fabs(vx));
    return res;
}

/// Checks the horizontal inequality -xi.(z-x) <= sigma (|z-x|^2 + |b-V(x)|^2)
/// over nodes z in the ball and hypograph levels b below V(z). The binding
/// level b = min(V(x), V(z)) is always included alongside the sampled ladder.
inline InequalityCheck verify_horizontal_supergradient(const ValueField& field, std::span<const double> x,
                                                       std::span<const double> xi, double sigma, double radius) {
    double vx = interpolate(field, x);
    double hstep = field.grid.max_spacing();
    InequalityCheck res;
    res.worst = -std::numeric_limits<double>::infinity();
    detail::for_nodes_in_ball(field.grid, x, radius, [&](std::size_t flat, const Vec& z) {
        if (field.status[flat] == NodeStatus::Unreached) return;
        double vz = field.value[flat];
        double lhs = -dot(xi, sub(z, x));
        double d2 = norm2(sub(z, x));
        auto check = [&](double beta) {
            double rhs = sigma * (d2 + (beta - vx) * (beta - vx));
            res.worst = std::max(res.worst, lhs - rhs);
        };
        check(std::min(vx, vz));
        for (int j = 0; j < 5; ++j) {
            double beta = vz - j * hstep;
            if (beta < vx - radius) break;
            check(beta);
        }
    });
    if (!std::isfinite(res.worst)) res.worst = 0.0;
    res.holds = res.worst <= 1e-9 * (1.0 + std::fabs(vx));
    return res;
}

enum class Verdict { Certified, CertifiedByValue, Refuted, Inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Certified: return "CERTIFIED";
        case Verdict::CertifiedByValue: return "CERTIFIED-BY-VALUE";
        case Verdict::Refuted: return "REFUTED";
        case Verdict::Inconclusive: return "INCONCLUSIVE";
    }
    return "?";
}

struct CertifyOptions {
    double h_tol = 1e-6;    // |-p.f - r| tolerance along the arc
    int samples = 16;       // time samples checked
    double sigma_pad = 1.0; // sigma = 1/(2 rho) + pad
};

struct CertifyResult {
    Verdict verdict = Verdict::Inconclusive;
    double cost_gap = 0.0;        // cost - interpolated V at the start
    double max_h_residual = 0.0;
    double max_super_violation = 0.0;
};

/// Sampled exterior-sphere radius of hypo(V) at (x, V(x)) for a unit
/// generator v in R^{d+1}: the infimum over hypograph samples
/// w = (z, beta) - (x, V(x)), beta running down a ladder below V(z), with
/// v.w > 0 of |w|^2 / (2 v.w). +inf when no sample has positive projection.
inline double exterior_sphere_radius(const ValueField& field, std::span<const double> x,
                                     std::span<const double> v, double radius, int levels = 5) {
    const int d = field.grid.dim();
    double vx = interpolate(field, x);
    double hstep = field.grid.max_spacing();
    double best = std::numeric_limits<double>::infinity();
    detail::for_nodes_in_ball(field.grid, x, radius, [&](std::size_t flat, const Vec& z) {
        if (field.status[flat] == NodeStatus::Unreached) return;
        double d2 = norm2(sub(z, x));
        double horiz = 0.0;
        for (int i = 0; i < d; ++i) horiz += v[i] * (z[i] - x[i]);
        for (int j = 0; j < levels; ++j) {
            double beta = field.value[flat] - j * hstep;
            double db = beta - vx;
            double w2 = d2 + db * db;
            if (w2 < 1e-24) continue;
            double proj = horiz + v[d] * db;
            if (proj > 1e-14) best = std::min(best, w2 / (2.0 * proj));
        }
    });
    return best;
}

/// Sufficient-condition check for optimality of a forward trajectory. With
/// a costate curve, certification needs the supergradient inequality and
/// the stationarity |-p.f - r| = 0 along the samples; without one, only the
/// value comparison is available and is reported as a distinct verdict.
inline CertifyResult certify_optimality(const ControlProblem& p, const ValueField& field, const Trajectory& traj,
                                        const std::vector<Vec>* p_curve, CertifyOptions opts = {}) {
    CertifyResult res;
    if (!traj.reached) {
        res.verdict = Verdict::Inconclusive;
        return res;
    }
    double spacing = field.grid.max_spacing();
    double v0 = interpolate(field, traj.y.front());
    res.cost_gap = traj.cost - v0;
    if (res.cost_gap > 10.0 * spacing) {
        res.verdict = Verdict::Refuted;
        return res;
    }
    if (!p_curve) {
        res.verdict = std::fabs(res.cost_gap) <= 10.0 * spacing ? Verdict::CertifiedByValue : Verdict::Inconclusive;
        return res;
    }
    if (p_curve->size() != traj.y.size()) throw NumericalError("costate curve length does not match the trajectory");

    bool ok = true;
    int m = static_cast<int>(traj.y.size());
    Vec f(p.dim());
    for (int s = 0; s < opts.samples; ++s) {
        int k = static_cast<int>(std::llround(double(s) * (m - 2) / std::max(1, opts.samples - 1)));
        const Vec& y = traj.y[k];
        const Vec& q = (*p_curve)[k];
        // supergradient inequality with the curvature constant from the
        // local exterior-sphere estimate
        Vec gen(p.dim() + 1);
        for (int i = 0; i < p.dim(); ++i) gen[i] = -q[i];
        gen[p.dim()] = 1.0;
        gen = unit(gen);
        double rho = exterior_sphere_radius(field, y, gen, 5.0 * spacing, 5);
        double sigma = (std::isfinite(rho) ? 1.0 / (2.0 * rho) : 0.0) + opts.sigma_pad;
        auto chk = verify_supergradient(field, y, q, sigma, 5.0 * spacing);
        res.max_super_violation = std::max(res.max_super_violation, chk.worst);
        if (!chk.holds) ok = false;
        p.eval_dynamics(y, p.controls()[traj.u_index[k]], f);
        double hres = std::fabs(-dot(q, f) - p.eval_running_cost(y, p.controls()[traj.u_index[k]]));
        res.max_h_residual = std::max(res.max_h_residual, hres);
        if (hres > opts.h_tol) ok = false;
    }
    res.verdict = ok ? Verdict::Certified : Verdict::Inconclusive;
    return res;
}

}  // namespace exitgrid

#endif
