#ifndef EXITGRID_SOLVER_HPP
#define EXITGRID_SOLVER_HPP

#include <chrono>
#include <cmath>
#include <thread>
#include <vector>

#include "exitgrid/grid.hpp"
#include "exitgrid/hamiltonian.hpp"
#include "exitgrid/problem.hpp"

namespace exitgrid {

class SolveError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct SolveOptions {
    double tol = 1e-9;     // relative: converged when max change <= tol*(1+|V|)
    int max_sweeps = 500;  // individual directional passes
    double cfl = 0.9;
    bool jacobi = false;   // update from the previous iterate instead of in place
    int threads = 0;       // 0 = worker_count(); only the Jacobi node loop parallelizes
};

namespace detail {

/// Per-control data for the common case of state-independent dynamics:
/// the semi-Lagrangian foot offset is then a fixed index shift + fraction.
struct FrozenControl {
    double tau = 0.0;
    double run_cost = 0.0;  // valid when the running cost is state-free
    Vec f;
    std::vector<int> shift;
    Vec frac;
};

/// Exit-time of the segment x + t f across {h <= 0}, given h(x) > 0 and
/// h(x + tau f) <= 0, located by bisection.
inline double bisect_crossing(const ControlProblem& p, std::span<const double> x, std::span<const double> f,
                              double tau) {
    const int d = p.dim();
    double lo = 0.0, hi = tau;
    Vec y(d);
    for (int it = 0; it < 60; ++it) {
        double mid = 0.5 * (lo + hi);
        for (int i = 0; i < d; ++i) y[i] = x[i] + mid * f[i];
        if (p.eval_target_level(y) <= 0.0)
            hi = mid;
        else
            lo = mid;
        if (hi - lo <= 1e-14 * std::max(1.0, tau)) break;
    }
    return hi;
}

}  // namespace detail

namespace detail {

/// Node relaxation shared by the Gauss-Seidel and Jacobi drivers. Within
/// two cells of the target the update also offers the boundary-crossing
/// candidate t* r + g(y(t*)): freezing only the nodes with h <= 0 would
/// localize the boundary to node resolution, and the resulting O(dx)
/// per-row offsets are visible as gradient noise in every downstream
/// diagnostic.
struct NodeRelaxer {
    const ControlProblem& p;
    const Grid& grid;
    double cfl;
    bool frozen_f = false, frozen_r = false;
    std::vector<FrozenControl> fc;
    std::vector<std::uint8_t> band;  // nodes whose segment may cross the boundary

    struct Scratch {
        Vec x, f, foot;
        std::vector<int> mi;
        explicit Scratch(int d) : x(d), f(d), foot(d), mi(d) {}
    };

    NodeRelaxer(const ControlProblem& prob, const Grid& g, double cfl_, const std::vector<std::uint8_t>& target_mask)
        : p(prob), grid(g), cfl(cfl_) {
        frozen_f = p.dynamics_state_free();
        frozen_r = p.running_cost_state_free() && frozen_f;
        band = dilate_mask(grid, target_mask, 2);
        const int d = grid.dim();
        const int nk = static_cast<int>(p.controls().size());
        if (frozen_f) {
            fc.resize(nk);
            Vec x0(d, 0.0), f(d);
            for (int k = 0; k < nk; ++k) {
                p.eval_dynamics(x0, p.controls()[k], f);
                double speed = std::max(norm(f), 1e-9);
                fc[k].tau = cfl * grid.min_spacing() / speed;
                fc[k].f = f;
                if (frozen_r) fc[k].run_cost = p.eval_running_cost(x0, p.controls()[k]);
                fc[k].shift.resize(d);
                fc[k].frac.resize(d);
                for (int i = 0; i < d; ++i) {
                    double delta = fc[k].tau * f[i] / grid.dx[i];
                    double fl = std::floor(delta);
                    fc[k].shift[i] = static_cast<int>(fl);
                    fc[k].frac[i] = delta - fl;
                    if (fc[k].frac[i] < 1e-14) fc[k].frac[i] = 0.0;
                }
            }
        }
    }

    double relax(std::size_t flat, const Vec& values_in, double current, Scratch& s) const {
        const int d = grid.dim();
        const int nk = static_cast<int>(p.controls().size());
        grid.unindex(flat, s.mi);
        grid.node(s.mi, s.x);
        double best = current;
        const bool near_target = band[flat] != 0;
        for (int k = 0; k < nk; ++k) {
            double tau, run;
            double iv;
            if (frozen_f) {
                const FrozenControl& c = fc[k];
                tau = c.tau;
                run = frozen_r ? c.run_cost : p.eval_running_cost(s.x, p.controls()[k]);
                // fixed index shift: gather the 2^d cell corners directly
                std::size_t corner = flat;
                bool oob = false;
                for (int i = 0; i < d; ++i) {
                    int b = s.mi[i] + c.shift[i];
                    int hi_ok = c.frac[i] == 0.0 ? grid.n[i] - 1 : grid.n[i] - 2;
                    if (b < 0 || b > hi_ok) {
                        oob = true;
                        break;
                    }
                    corner += static_cast<std::size_t>(c.shift[i]) * grid.stride[i];
                }
                if (oob) {
                    iv = kBig;
                } else {
                    double acc = 0.0;
                    for (int cidx = 0; cidx < (1 << d); ++cidx) {
                        double weight = 1.0;
                        std::size_t off = corner;
                        bool skip = false;
                        for (int i = 0; i < d; ++i) {
                            int bit = (cidx >> i) & 1;
                            double wi = bit ? c.frac[i] : 1.0 - c.frac[i];
                            if (wi == 0.0) {
                                skip = true;
                                break;
                            }
                            weight *= wi;
                            off += static_cast<std::size_t>(bit) * grid.stride[i];
                        }
                        if (!skip) acc += weight * values_in[off];
                    }
                    iv = acc;
                }
                if (near_target) {
                    for (int i = 0; i < d; ++i) s.foot[i] = s.x[i] + tau * c.f[i];
                    double cand = crossing_candidate(s.x, c.f, tau, run, s);
                    if (cand < best) best = cand;
                }
            } else {
                p.eval_dynamics(s.x, p.controls()[k], s.f);
                double speed = std::max(norm(s.f), 1e-9);
                tau = cfl * grid.min_spacing() / speed;
                run = p.eval_running_cost(s.x, p.controls()[k]);
                for (int i = 0; i < d; ++i) s.foot[i] = s.x[i] + tau * s.f[i];
                bool outside = false;
                iv = interp_raw(grid, values_in, s.foot, outside);
                if (near_target) {
                    double cand = crossing_candidate(s.x, s.f, tau, run, s);
                    if (cand < best) best = cand;
                }
            }
            double cand = tau * run + iv;
            if (cand < best) best = cand;
        }
        return best;
    }

  private:
    double crossing_candidate(const Vec& x, const Vec& f, double tau, double run, Scratch& s) const {
        // s.foot already holds x + tau f
        if (p.eval_target_level(s.foot) > 0.0) return kBig;
        double tstar = bisect_crossing(p, x, f, tau);
        Vec y(x);
        axpy(tstar, f, y);
        return tstar * run + p.eval_terminal_cost(y);
    }
};

}  // namespace detail

/// Semi-Lagrangian fast sweeping for the exit-time problem. Nodes inside
/// the target are frozen at the terminal cost; the others relax the
/// dynamic-programming update
///     V(x) <- min_w [ tau r(x,w) + I[V](x + tau f(x,w)) ],
/// tau = cfl * min spacing / max(|f|, 1e-9), under Gauss-Seidel passes that
/// cycle through all 2^d axis orderings. Out-of-box foot points read the
/// impassable-boundary sentinel; segments crossing the target boundary may
/// exit at the bisected crossing point.
inline ValueField solve_value(const ControlProblem& p, const Grid& grid, SolveOptions opts = {}) {
    const auto t_start = std::chrono::steady_clock::now();
    const int d = grid.dim();
    const std::size_t nn = grid.size();

    ValueField field;
    field.grid = grid;
    field.value.assign(nn, kBig);
    field.status.assign(nn, NodeStatus::Converged);

    // freeze target nodes at the terminal cost
    std::vector<std::uint8_t> target_mask(nn, 0);
    std::size_t n_target = 0;
    {
        std::vector<int> mi(d, 0);
        Vec x(d);
        for (std::size_t flat = 0; flat < nn; ++flat) {
            grid.unindex(flat, mi);
            grid.node(mi, x);
            if (p.eval_target_level(x) <= 0.0) {
                field.value[flat] = p.eval_terminal_cost(x);
                field.status[flat] = NodeStatus::Target;
                target_mask[flat] = 1;
                ++n_target;
            }
        }
    }
    if (n_target == 0) throw SolveError("no target node in grid: the target set {h <= 0} misses the box");

    detail::NodeRelaxer relaxer(p, grid, opts.cfl, target_mask);
    detail::NodeRelaxer::Scratch scratch(d);

    const int orderings = 1 << d;
    int pass = 0;
    double cycle_change = 0.0;
    Vec snapshot;
    while (pass < opts.max_sweeps) {
        int ordering = pass % orderings;
        double pass_change = 0.0;
        if (!opts.jacobi) {
            // Gauss-Seidel pass in the requested axis ordering
            std::vector<int> it(d);
            for (int i = 0; i < d; ++i) it[i] = (ordering >> i) & 1 ? grid.n[i] - 1 : 0;
            for (;;) {
                std::size_t flat = grid.index(it);
                if (field.status[flat] != NodeStatus::Target) {
                    double nv = relaxer.relax(flat, field.value, field.value[flat], scratch);
                    double ch = field.value[flat] - nv;
                    if (ch > pass_change) pass_change = ch;
                    field.value[flat] = nv;
                }
                int axis = d - 1;
                for (;;) {
                    bool rev = (ordering >> axis) & 1;
                    it[axis] += rev ? -1 : 1;
                    if (rev ? it[axis] >= 0 : it[axis] < grid.n[axis]) break;
                    it[axis] = rev ? grid.n[axis] - 1 : 0;
                    if (--axis < 0) break;
                }
                if (axis < 0) break;
            }
        } else {
            snapshot = field.value;
            int workers = opts.threads > 0 ? opts.threads : worker_count();
            workers = std::max(1, std::min<int>(workers, 64));
            std::vector<double> change(workers, 0.0);
            auto run_chunk = [&](int w) {
                std::size_t chunk = (nn + workers - 1) / workers;
                std::size_t b = w * chunk, e = std::min(nn, b + chunk);
                detail::NodeRelaxer::Scratch ls(d);
                for (std::size_t flat = b; flat < e; ++flat) {
                    if (field.status[flat] == NodeStatus::Target) continue;
                    double nv = relaxer.relax(flat, snapshot, snapshot[flat], ls);
                    double ch = snapshot[flat] - nv;
                    if (ch > change[w]) change[w] = ch;
                    field.value[flat] = nv;
                }
            };
            if (workers == 1) {
                run_chunk(0);
            } else {
                std::vector<std::thread> pool;
                for (int w = 0; w < workers; ++w) pool.emplace_back(run_chunk, w);
                for (auto& t : pool) t.join();
            }
            for (double c : change) pass_change = std::max(pass_change, c);
        }

        ++pass;
        cycle_change = std::max(cycle_change, pass_change);
        if (pass % orderings == 0) {
            double vmax = 0.0;
            for (std::size_t i = 0; i < nn; ++i)
                if (field.value[i] < kBig / 2) vmax = std::max(vmax, std::fabs(field.value[i]));
            if (cycle_change <= opts.tol * (1.0 + vmax)) break;
            cycle_change = 0.0;
        }
    }

    field.sweeps_used = pass;
    field.final_change = cycle_change;
    for (std::size_t i = 0; i < nn; ++i)
        if (field.status[i] != NodeStatus::Target)
            field.status[i] = field.value[i] >= kBig / 2 ? NodeStatus::Unreached : NodeStatus::Converged;
    field.solve_seconds =
        std::chrono::duration_cast<std::chrono::duration<double>>(std::chrono::steady_clock::now() - t_start).count();
    return field;
}

/// Chebyshev dilation of a node mask by `radius` nodes (axis-separable).
inline std::vector<std::uint8_t> dilate_mask(const Grid& g, const std::vector<std::uint8_t>& mask, int radius) {
    std::vector<std::uint8_t> cur = mask, next;
    for (int axis = 0; axis < g.dim(); ++axis) {
        for (int r = 0; r < radius; ++r) {
            next = cur;
            std::vector<int> mi(g.dim());
            for (std::size_t flat = 0; flat < cur.size(); ++flat) {
                if (cur[flat]) continue;
                g.unindex(flat, mi);
                if (mi[axis] > 0 && cur[flat - g.stride[axis]]) next[flat] = 1;
                else if (mi[axis] < g.n[axis] - 1 && cur[flat + g.stride[axis]]) next[flat] = 1;
            }
            cur.swap(next);
        }
    }
    return cur;
}

/// Nodes excluded from residual norms and detectors: target, unreached,
/// a 2-node collar around both, and a 2-node border of the box.
inline std::vector<std::uint8_t> exclusion_collar(const ValueField& field, int collar = 2) {
    const Grid& g = field.grid;
    std::vector<std::uint8_t> seed(field.value.size(), 0);
    for (std::size_t i = 0; i < seed.size(); ++i)
        if (field.status[i] != NodeStatus::Converged) seed[i] = 1;
    auto mask = dilate_mask(g, seed, collar);
    std::vector<int> mi(g.dim());
    for (std::size_t flat = 0; flat < mask.size(); ++flat) {
        g.unindex(flat, mi);
        for (int i = 0; i < g.dim(); ++i)
            if (mi[i] < collar || mi[i] > g.n[i] - 1 - collar) mask[flat] = 1;
    }
    return mask;
}

struct ResidualField {
    Vec residual;                         // 0 on excluded nodes
    std::vector<std::uint8_t> included;   // 1 where the residual counts
    double linf = 0.0;
    double l1 = 0.0;  // mean absolute residual over included nodes
};

/// HJB residual H(x, D_upwind V) on converged nodes away from the collar.
/// The upwind one-sided difference per axis follows the sign of the optimal
/// dynamics: information flows along f, so the stencil looks downstream.
inline ResidualField hjb_residual_field(const ControlProblem& p, const ValueField& field,
                                        const std::vector<std::uint8_t>* extra_exclude = nullptr) {
    const Grid& g = field.grid;
    const int d = g.dim();
    ResidualField out;
    out.residual.assign(field.value.size(), 0.0);
    out.included.assign(field.value.size(), 0);
    auto excluded = exclusion_collar(field);

    std::vector<int> mi(d);
    Vec x(d), grad(d), f(d);
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t flat = 0; flat < field.value.size(); ++flat) {
        if (excluded[flat]) continue;
        if (extra_exclude && (*extra_exclude)[flat]) continue;
        g.unindex(flat, mi);
        g.node(mi, x);
        // central gradient to pick the optimal control, then upwind refresh
        for (int i = 0; i < d; ++i) {
            double vp = field.value[flat + g.stride[i]];
            double vm = field.value[flat - g.stride[i]];
            grad[i] = (vp - vm) / (2.0 * g.dx[i]);
        }
        auto hv = hamiltonian(p, x, grad);
        p.eval_dynamics(x, p.controls()[hv.argmax.front()], f);
        for (int i = 0; i < d; ++i) {
            double v0 = field.value[flat];
            if (f[i] > 1e-12)
                grad[i] = (field.value[flat + g.stride[i]] - v0) / g.dx[i];
            else if (f[i] < -1e-12)
                grad[i] = (v0 - field.value[flat - g.stride[i]]) / g.dx[i];
        }
        double res = hamiltonian(p, x, grad).value;
        out.residual[flat] = res;
        out.included[flat] = 1;
        out.linf = std::max(out.linf, std::fabs(res));
        sum += std::fabs(res);
        ++count;
    }
    out.l1 = count ? sum / double(count) : 0.0;
    return out;
}

}  // namespace exitgrid

#endif
