#ifndef EXITGRID_REGULARITY_HPP
#define EXITGRID_REGULARITY_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "exitgrid/arcs.hpp"
#include "exitgrid/geometry.hpp"
#include "exitgrid/grid.hpp"
#include "exitgrid/solver.hpp"

namespace exitgrid {

struct DetectorOptions {
    double slope_gap = 0.5;  // one-sided slope difference flagging non-differentiability
    double kappa = 1.0;      // blow-up threshold kappa / sqrt(max spacing)
};

namespace detail {

/// Central/one-sided node differences with collar handling. Returns false
/// when the stencil leaves the usable region.
inline bool node_slopes(const ValueField& field, const std::vector<std::uint8_t>& excluded, std::size_t flat,
                        Vec& central, Vec& fwd, Vec& bwd) {
    const Grid& g = field.grid;
    const int d = g.dim();
    if (excluded[flat]) return false;
    std::vector<int> mi(d);
    g.unindex(flat, mi);
    for (int i = 0; i < d; ++i) {
        if (mi[i] == 0 || mi[i] == g.n[i] - 1) return false;
        std::size_t ip = flat + g.stride[i], im = flat - g.stride[i];
        if (field.status[ip] == NodeStatus::Unreached || field.status[im] == NodeStatus::Unreached) return false;
        double v0 = field.value[flat];
        fwd[i] = (field.value[ip] - v0) / g.dx[i];
        bwd[i] = (v0 - field.value[im]) / g.dx[i];
        central[i] = 0.5 * (fwd[i] + bwd[i]);
    }
    return true;
}

}  // namespace detail

/// Nodes where V is not differentiable at grid scale: one-sided slopes
/// disagree by more than the gap threshold, or the blow-up detector fires.
/// Nodes in the target/unreached collar are never flagged.
inline std::vector<std::uint8_t> detect_singular_set(const ValueField& field, DetectorOptions opts = {}) {
    const int d = field.grid.dim();
    auto excluded = exclusion_collar(field);
    std::vector<std::uint8_t> mask(field.value.size(), 0);
    double blow = opts.kappa / std::sqrt(field.grid.max_spacing());
    Vec c(d), f(d), b(d);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!detail::node_slopes(field, excluded, i, c, f, b)) continue;
        bool flag = norm(c) >= blow;
        for (int ax = 0; ax < d && !flag; ++ax)
            if (std::fabs(f[ax] - b[ax]) > opts.slope_gap) flag = true;
        mask[i] = flag ? 1 : 0;
    }
    return mask;
}

/// Nodes whose central gradient magnitude exceeds kappa / sqrt(max spacing):
/// the grid-scale proxy for non-Lipschitz points.
inline std::vector<std::uint8_t> detect_nonlipschitz_set(const ValueField& field, DetectorOptions opts = {}) {
    const int d = field.grid.dim();
    auto excluded = exclusion_collar(field);
    std::vector<std::uint8_t> mask(field.value.size(), 0);
    double blow = opts.kappa / std::sqrt(field.grid.max_spacing());
    Vec c(d), f(d), b(d);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!detail::node_slopes(field, excluded, i, c, f, b)) continue;
        mask[i] = norm(c) >= blow ? 1 : 0;
    }
    return mask;
}

/// Reachable-gradient fan at a base point: finite gradients from nearby
/// smooth nodes, normalized blow-up directions from flagged nodes, and the
/// unit generators they induce in R^{d+1}.
struct NormalFan {
    Vec base_x;
    double base_v = 0.0;
    std::vector<Vec> grads;       // cluster means of finite reachable gradients
    std::vector<Vec> hgrads;      // unit horizontal directions
    std::vector<Vec> generators;  // (-g,1)/|.| and (-h,0) in R^{d+1}
};

namespace detail {

/// Greedy angular clustering; returns cluster means (renormalized when the
/// inputs are unit vectors).
inline std::vector<Vec> cluster_by_angle(const std::vector<Vec>& vecs, double tol_deg, bool renormalize) {
    std::vector<Vec> sums;
    std::vector<int> counts;
    for (const auto& v : vecs) {
        bool placed = false;
        for (std::size_t c = 0; c < sums.size(); ++c) {
            Vec mean = scaled(sums[c], 1.0 / counts[c]);
            if (norm(mean) > 1e-14 && norm(v) > 1e-14 && angle_deg(mean, v) <= tol_deg) {
                axpy(1.0, v, sums[c]);
                ++counts[c];
                placed = true;
                break;
            }
        }
        if (!placed) {
            sums.push_back(v);
            counts.push_back(1);
        }
    }
    std::vector<Vec> means;
    for (std::size_t c = 0; c < sums.size(); ++c) {
        Vec m = scaled(sums[c], 1.0 / counts[c]);
        if (renormalize && norm(m) > 1e-14) m = unit(m);
        means.push_back(std::move(m));
    }
    return means;
}

}  // namespace detail

struct FanOptions {
    double cluster_deg = 5.0;
    DetectorOptions detector;
};

/// Builds the fan from node gradients in B(x, radius). The singular and
/// blow-up masks must come from the same field.
inline NormalFan reachable_gradient_fan(const ValueField& field, std::span<const double> x, double radius,
                                        const std::vector<std::uint8_t>& sigma_mask,
                                        const std::vector<std::uint8_t>& sigma_inf_mask, FanOptions opts = {}) {
    const int d = field.grid.dim();
    auto excluded = exclusion_collar(field);
    std::vector<Vec> grads, hgrads;
    Vec c(d), f(d), b(d);
    detail::for_nodes_in_ball(field.grid, x, radius, [&](std::size_t flat, const Vec&) {
        if (!detail::node_slopes(field, excluded, flat, c, f, b)) return;
        if (sigma_inf_mask[flat]) {
            if (norm(c) > 1e-14) hgrads.push_back(unit(c));
        } else if (!sigma_mask[flat]) {
            grads.push_back(c);
        }
    });
    NormalFan fan;
    fan.base_x.assign(x.begin(), x.end());
    fan.base_v = interpolate(field, x);
    // cluster gradients by the angle of their hypograph generators so that
    // magnitude differences are not collapsed
    {
        std::vector<Vec> gen;
        gen.reserve(grads.size());
        for (const auto& g : grads) {
            Vec v(d + 1);
            for (int i = 0; i < d; ++i) v[i] = -g[i];
            v[d] = 1.0;
            gen.push_back(unit(v));
        }
        auto gmeans = detail::cluster_by_angle(gen, opts.cluster_deg, true);
        for (const auto& m : gmeans) {
            // back to gradient form: m = (-g, s) with s > 0
            double s = m[d];
            if (s < 1e-12) continue;
            Vec g(d);
            for (int i = 0; i < d; ++i) g[i] = -m[i] / s;
            fan.grads.push_back(std::move(g));
        }
    }
    fan.hgrads = detail::cluster_by_angle(hgrads, opts.cluster_deg, true);
    for (const auto& g : fan.grads) {
        Vec v(d + 1);
        for (int i = 0; i < d; ++i) v[i] = -g[i];
        v[d] = 1.0;
        fan.generators.push_back(unit(v));
    }
    for (const auto& hg : fan.hgrads) {
        Vec v(d + 1, 0.0);
        for (int i = 0; i < d; ++i) v[i] = -hg[i];
        fan.generators.push_back(std::move(v));
    }
    return fan;
}

/// Convenience overload computing the masks on the fly.
inline NormalFan reachable_gradient_fan(const ValueField& field, std::span<const double> x, double radius,
                                        FanOptions opts = {}) {
    auto sigma = detect_singular_set(field, opts.detector);
    auto sigma_inf = detect_nonlipschitz_set(field, opts.detector);
    return reachable_gradient_fan(field, x, radius, sigma, sigma_inf, opts);
}

struct PointednessResult {
    bool pointed = false;
    double min_norm = 0.0;
};

/// Frank-Wolfe minimum-norm point of the convex hull of the fan generators;
/// the cone is pointed iff the hull of unit generators misses the origin.
inline PointednessResult check_pointedness(const NormalFan& fan, int iterations = 200) {
    PointednessResult res;
    if (fan.generators.empty()) return res;
    Vec x = fan.generators.front();
    for (int it = 0; it < iterations; ++it) {
        const Vec* s = nullptr;
        double bestdot = std::numeric_limits<double>::infinity();
        for (const auto& g : fan.generators) {
            double d = dot(x, g);
            if (d < bestdot) {
                bestdot = d;
                s = &g;
            }
        }
        Vec diff = sub(x, *s);
        double dn = norm2(diff);
        if (dn < 1e-30) break;
        double gamma = std::clamp(dot(x, diff) / dn, 0.0, 1.0);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = (1.0 - gamma) * x[i] + gamma * (*s)[i];
    }
    res.min_norm = norm(x);
    res.pointed = res.min_norm > 1e-6;
    return res;
}

struct DifferentiabilityResult {
    bool differentiable = false;
    Vec direction;  // normalized mean generator
};

/// The hypograph is differentiable at (x, V(x)) iff the proximal normal
/// cone is a single ray: all fan generators within the angular tolerance
/// of their common mean.
inline DifferentiabilityResult check_hypograph_differentiability(const NormalFan& fan, double angular_tol_deg = 5.0) {
    DifferentiabilityResult res;
    if (fan.generators.empty()) return res;
    Vec mean(fan.generators.front().size(), 0.0);
    for (const auto& g : fan.generators) axpy(1.0, g, mean);
    if (norm(mean) < 1e-14) return res;
    res.direction = unit(mean);
    res.differentiable = true;
    for (const auto& g : fan.generators)
        if (angle_deg(res.direction, g) > angular_tol_deg) res.differentiable = false;
    return res;
}

/// Largest symmetric second difference over interior nodes:
///   max over nodes and axes of [V(x+he) + V(x-he) - 2V(x)] / h^2,
/// with the probe h quantized to whole node offsets per axis. A positive
/// target_collar excludes stencils within that many nodes of the target or
/// unreached region; collar 0 probes everything with a finite value
/// (stencils touching unreached nodes are always skipped).
inline double semiconcavity_constant(const ValueField& field, const std::vector<std::uint8_t>* exclude,
                                     double probe_h, int target_collar = 3) {
    const Grid& g = field.grid;
    const int d = g.dim();
    std::vector<std::uint8_t> skip(field.value.size(), 0);
    if (target_collar > 0) {
        skip = exclusion_collar(field, target_collar);
    } else {
        for (std::size_t i = 0; i < skip.size(); ++i)
            if (field.status[i] == NodeStatus::Unreached) skip[i] = 1;
    }
    double cmax = -std::numeric_limits<double>::infinity();
    std::vector<int> mi(d);
    for (std::size_t flat = 0; flat < field.value.size(); ++flat) {
        if (skip[flat]) continue;
        if (exclude && (*exclude)[flat]) continue;
        g.unindex(flat, mi);
        for (int ax = 0; ax < d; ++ax) {
            int steps = std::max(1, static_cast<int>(std::lround(probe_h / g.dx[ax])));
            double h = steps * g.dx[ax];
            if (mi[ax] - steps < 0 || mi[ax] + steps > g.n[ax] - 1) continue;
            std::size_t ip = flat + static_cast<std::size_t>(steps) * g.stride[ax];
            std::size_t im = flat - static_cast<std::size_t>(steps) * g.stride[ax];
            if (skip[ip] || skip[im]) continue;
            if (exclude && ((*exclude)[ip] || (*exclude)[im])) continue;
            double c = (field.value[ip] + field.value[im] - 2.0 * field.value[flat]) / (h * h);
            cmax = std::max(cmax, c);
        }
    }
    return std::isfinite(cmax) ? cmax : 0.0;
}

/// Checks -q/|q| . (z - x) <= sigma |z-x|^2 over nodes z in the ball with
/// V(z) >= alpha: the sampled interior-sphere inequality of the sublevel
/// set at its boundary point x.
inline InequalityCheck verify_sublevel_normal(const ValueField& field, std::span<const double> x,
                                              std::span<const double> q, double alpha, double sigma,
                                              double radius) {
    double qn = norm(q);
    if (qn < 1e-14) throw NumericalError("sublevel normal check needs a nonzero costate");
    Vec qhat = scaled(q, 1.0 / qn);
    InequalityCheck res;
    res.worst = -std::numeric_limits<double>::infinity();
    detail::for_nodes_in_ball(field.grid, x, radius, [&](std::size_t flat, const Vec& z) {
        if (field.status[flat] == NodeStatus::Unreached) return;
        if (field.value[flat] < alpha) return;
        double lhs = -dot(qhat, sub(z, x)) - sigma * norm2(sub(z, x));
        res.worst = std::max(res.worst, lhs);
    });
    if (!std::isfinite(res.worst)) res.worst = 0.0;  // vacuous
    res.holds = res.worst <= 1e-9;
    return res;
}

struct RepresentationComparison {
    double dist_p_deg = 0.0;    // between (-g,1)-type generator sets
    double dist_inf_deg = 0.0;  // between horizontal generator sets
    bool pointed = false;
    NormalFan fan;
    TransportedNormals transported;
};

namespace detail {

inline double angular_hausdorff_deg(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.empty() && b.empty()) return 0.0;
    if (a.empty() || b.empty()) return 180.0;
    double h = 0.0;
    auto one_sided = [&](const std::vector<Vec>& from, const std::vector<Vec>& to) {
        for (const auto& u : from) {
            double best = 180.0;
            for (const auto& v : to) best = std::min(best, angle_deg(u, v));
            h = std::max(h, best);
        }
    };
    one_sided(a, b);
    one_sided(b, a);
    return h;
}

inline std::vector<Vec> gradient_generators(const std::vector<Vec>& grads, int d) {
    std::vector<Vec> out;
    for (const auto& g : grads) {
        Vec v(d + 1);
        for (int i = 0; i < d; ++i) v[i] = -g[i];
        v[d] = 1.0;
        out.push_back(unit(v));
    }
    return out;
}

}  // namespace detail

/// Compares the reachable-gradient side of the supergradient representation
/// against the transported-normal side, as angular Hausdorff distances
/// between generator sets. Meaningful only when the fan is pointed.
inline RepresentationComparison compare_representation(const ControlProblem& p, const ValueField& field,
                                                       std::span<const double> x, double fan_radius = 0.0,
                                                       FanOptions fan_opts = {}, TransportOptions topts = {}) {
    RepresentationComparison out;
    double radius = fan_radius > 0.0 ? fan_radius : 3.0 * field.grid.max_spacing();
    out.fan = reachable_gradient_fan(field, x, radius, fan_opts);
    out.pointed = check_pointedness(out.fan).pointed;
    out.transported = transported_normals(p, field, x, topts);
    const int d = field.grid.dim();
    out.dist_p_deg = detail::angular_hausdorff_deg(detail::gradient_generators(out.fan.grads, d),
                                                   detail::gradient_generators(out.transported.n1, d));
    std::vector<Vec> horiz_fan, horiz_tn;
    for (const auto& hg : out.fan.hgrads) horiz_fan.push_back(hg);
    for (const auto& q : out.transported.n0) horiz_tn.push_back(q);
    out.dist_inf_deg = detail::angular_hausdorff_deg(horiz_fan, horiz_tn);
    return out;
}

struct SweepResult {
    std::vector<std::vector<Vec>> curves;  // polylines of nondegenerate horizontal arcs
    std::vector<Vec> degenerate_points;    // base points whose fan degenerated
};

/// Runs the backward horizontal characteristic from every tangential (N0)
/// boundary sample; degenerate fans are reported as points instead of
/// curves.
inline SweepResult sweep_singular_set(const ControlProblem& p, const std::vector<BoundaryPoint>& samples,
                                      double T, double dt) {
    SweepResult out;
    for (const auto& bp : samples) {
        if (bp.cls != BoundaryClass::N0) continue;
        TerminalData td = terminal_from_boundary(p, bp);
        ExtremalArc arc;
        try {
            arc = backward_horizontal(p, td, T, dt);
        } catch (const NumericalError&) {
            continue;  // left the box; skip this seed
        }
        if (arc.degenerate_fan) {
            out.degenerate_points.push_back(bp.x);
        } else {
            out.curves.push_back(arc.y);
        }
    }
    return out;
}

/// Structured diagnostics emitted by the diagnose command.
struct RegularityReport {
    std::vector<int> grid_n;
    std::vector<std::uint8_t> sigma_mask;
    std::vector<std::uint8_t> sigma_inf_mask;
    struct PointDiagnostics {
        Vec x;
        bool pointed = false;
        double min_norm = 0.0;
        bool hypograph_differentiable = false;
        Vec direction;
        double min_exterior_radius = 0.0;
        double dist_p_deg = 0.0;
        double dist_inf_deg = 0.0;
        std::size_t n_grads = 0, n_hgrads = 0, n1_count = 0, n0_count = 0;
    };
    std::vector<PointDiagnostics> points;
    double semiconcavity_unrestricted = 0.0;
    double semiconcavity_masked = 0.0;
    double sigma_area_fraction = 0.0;
    double sigma_inf_area_fraction = 0.0;
};

inline RegularityReport diagnose(const ControlProblem& p, const ValueField& field,
                                 const std::vector<Vec>& sample_points, DetectorOptions det = {},
                                 FanOptions fan_opts = {}) {
    RegularityReport rep;
    rep.grid_n = field.grid.n;
    rep.sigma_mask = detect_singular_set(field, det);
    rep.sigma_inf_mask = detect_nonlipschitz_set(field, det);
    std::size_t nsig = 0, ninf = 0;
    for (std::size_t i = 0; i < rep.sigma_mask.size(); ++i) {
        nsig += rep.sigma_mask[i];
        ninf += rep.sigma_inf_mask[i];
    }
    rep.sigma_area_fraction = double(nsig) / double(rep.sigma_mask.size());
    rep.sigma_inf_area_fraction = double(ninf) / double(rep.sigma_mask.size());
    rep.semiconcavity_unrestricted = semiconcavity_constant(field, nullptr, field.grid.max_spacing());
    auto wide = dilate_mask(field.grid, rep.sigma_inf_mask, 3);
    rep.semiconcavity_masked = semiconcavity_constant(field, &wide, field.grid.max_spacing());

    for (const auto& x : sample_points) {
        RegularityReport::PointDiagnostics pd;
        pd.x = x;
        double radius = 3.0 * field.grid.max_spacing();
        NormalFan fan = reachable_gradient_fan(field, x, radius, rep.sigma_mask, rep.sigma_inf_mask, fan_opts);
        auto pt = check_pointedness(fan);
        pd.pointed = pt.pointed;
        pd.min_norm = pt.min_norm;
        auto diff = check_hypograph_differentiability(fan, fan_opts.cluster_deg);
        pd.hypograph_differentiable = diff.differentiable;
        pd.direction = diff.direction;
        pd.n_grads = fan.grads.size();
        pd.n_hgrads = fan.hgrads.size();
        double rho = std::numeric_limits<double>::infinity();
        for (const auto& gen : fan.generators)
            rho = std::min(rho, exterior_sphere_radius(field, x, gen, std::max(radius, 0.15)));
        pd.min_exterior_radius = rho;
        try {
            auto cmp = compare_representation(p, field, x, radius, fan_opts);
            pd.dist_p_deg = cmp.dist_p_deg;
            pd.dist_inf_deg = cmp.dist_inf_deg;
            pd.n1_count = cmp.transported.n1.size();
            pd.n0_count = cmp.transported.n0.size();
        } catch (const NumericalError&) {
            pd.dist_p_deg = pd.dist_inf_deg = -1.0;  // synthesis failed at this point
        }
        rep.points.push_back(std::move(pd));
    }
    return rep;
}

}  // namespace exitgrid

#endif
