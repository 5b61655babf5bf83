#ifndef EXITGRID_GEOMETRY_HPP
#define EXITGRID_GEOMETRY_HPP

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "exitgrid/problem.hpp"

namespace exitgrid {

class GeometryError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class BoundaryClass { N0, N1, Unreachable };

inline const char* to_string(BoundaryClass c) {
    switch (c) {
        case BoundaryClass::N0: return "N0";
        case BoundaryClass::N1: return "N1";
        case BoundaryClass::Unreachable: return "UNREACHABLE";
    }
    return "?";
}

/// A point on the target boundary with its unit proximal normal (pointing
/// into the target), the Hamiltonian margin max_w xi.f, and the resulting
/// transversality class.
struct BoundaryPoint {
    Vec x;
    Vec normal;  // unit, = -grad h / |grad h|
    double margin = 0.0;
    BoundaryClass cls = BoundaryClass::N1;
};

inline double boundary_tol() { return 1e-10; }
inline double margin_tol(const ControlProblem& p) { return 1e-6 * p.constants().speed_bound; }

/// Unit proximal normal to the closure of the target complement at a
/// boundary point of the level set {h = 0}.
inline Vec proximal_normal(const ControlProblem& p, std::span<const double> xstar) {
    Vec g = p.eval_target_gradient(xstar);
    double n = norm(g);
    if (n < 1e-12) throw GeometryError("vanishing target gradient at boundary point");
    return scaled(g, -1.0 / n);
}

/// margin = max over the control list of xi . f(x*, w); the class follows
/// the sign of the margin against the tolerance. A margin below -tol marks
/// a boundary point the dynamics cannot reach from outside.
inline std::pair<double, BoundaryClass> classify_boundary(const ControlProblem& p,
                                                          std::span<const double> xstar,
                                                          std::span<const double> xi) {
    Vec f(p.dim());
    double margin = -std::numeric_limits<double>::infinity();
    for (const auto& u : p.controls()) {
        p.eval_dynamics(xstar, u, f);
        margin = std::max(margin, dot(xi, f));
    }
    const double tol = margin_tol(p);
    BoundaryClass cls = margin > tol ? BoundaryClass::N1
                        : margin >= -tol ? BoundaryClass::N0
                                         : BoundaryClass::Unreachable;
    return {margin, cls};
}

/// Damped Newton iteration x <- x - a h(x) grad h / |grad h|^2 until
/// |h| <= 1e-10. The step is halved while it fails to decrease |h|.
inline BoundaryPoint project_to_boundary(const ControlProblem& p, std::span<const double> x0,
                                         double tol_b = boundary_tol(), int max_iter = 100) {
    Vec x(x0.begin(), x0.end());
    double h = p.eval_target_level(x);
    for (int it = 0; it < max_iter; ++it) {
        if (std::fabs(h) <= tol_b) {
            BoundaryPoint bp;
            bp.x = x;
            bp.normal = proximal_normal(p, x);
            auto [m, c] = classify_boundary(p, x, bp.normal);
            bp.margin = m;
            bp.cls = c;
            return bp;
        }
        Vec g = p.eval_target_gradient(x);
        double g2 = norm2(g);
        if (g2 < 1e-24) throw GeometryError("vanishing target gradient during projection");
        double alpha = 1.0;
        for (int halve = 0; halve < 40; ++halve) {
            Vec trial = x;
            axpy(-alpha * h / g2, g, trial);
            double ht = p.eval_target_level(trial);
            if (std::fabs(ht) < std::fabs(h)) {
                x = std::move(trial);
                h = ht;
                break;
            }
            alpha *= 0.5;
            if (halve == 39) throw GeometryError("boundary projection stalled");
        }
    }
    if (std::fabs(h) <= tol_b) {
        BoundaryPoint bp;
        bp.x = x;
        bp.normal = proximal_normal(p, x);
        auto [m, c] = classify_boundary(p, x, bp.normal);
        bp.margin = m;
        bp.cls = c;
        return bp;
    }
    throw GeometryError("boundary projection did not converge in " + std::to_string(max_iter) + " iterations");
}

/// Sampled inner-ball radius at a boundary point: the infimum over lattice
/// samples y in closure(S^c) with xi.(y - x*) > 0 of |y-x*|^2 / (2 xi.(y-x*)).
/// The lattice spacing snaps to a power-of-two fraction of the domain
/// diameter so enlarging the search radius only adds sample points, which
/// keeps the estimate monotone in the radius.
inline double inner_ball_radius(const ControlProblem& p, const BoundaryPoint& bp,
                                double search_radius, int n_samples) {
    const int d = p.dim();
    int per_axis = std::max(3, static_cast<int>(std::round(std::pow(double(std::max(n_samples, 8)), 1.0 / d))));
    double raw = 2.0 * search_radius / per_axis;
    double diam = p.domain().diameter();
    double s = diam;
    while (s > raw) s *= 0.5;
    if (!(s > 0.0)) throw GeometryError("degenerate inner-ball lattice");

    double best = std::numeric_limits<double>::infinity();
    const int reach = static_cast<int>(std::floor(search_radius / s));
    std::vector<int> off(d, -reach);
    Vec y(d);
    for (;;) {
        bool origin = true;
        for (int i = 0; i < d; ++i) {
            y[i] = bp.x[i] + off[i] * s;
            if (off[i] != 0) origin = false;
        }
        if (!origin && dist(y, bp.x) <= search_radius && p.eval_target_level(y) >= -1e-14) {
            double proj = dot(bp.normal, sub(y, bp.x));
            if (proj > 1e-14) best = std::min(best, norm2(sub(y, bp.x)) / (2.0 * proj));
        }
        int axis = d - 1;
        while (axis >= 0 && ++off[axis] > reach) off[axis--] = -reach;
        if (axis < 0) break;
    }
    return best;
}

/// Boundary sampler: scan an auxiliary mesh of the domain box for sign
/// changes of h, then Newton-project the crossing cells onto {h = 0}.
inline std::vector<BoundaryPoint> sample_boundary(const ControlProblem& p, int n_samples) {
    const int d = p.dim();
    int per_axis = d == 2 ? std::clamp(n_samples, 64, 4096)
                          : std::clamp(static_cast<int>(std::ceil(std::pow(double(n_samples), 1.0 / (d - 1)) * 2)), 24, 192);

    std::vector<BoundaryPoint> out;
    std::vector<int> idx(d, 0);
    Vec x(d), xn(d);
    const Box& box = p.domain();
    for (;;) {
        for (int i = 0; i < d; ++i) x[i] = box.lo(i) + box.extent(i) * idx[i] / (per_axis - 1);
        double h0 = p.eval_target_level(x);
        // look for a sign change toward the next mesh point on each axis
        for (int i = 0; i < d && static_cast<int>(out.size()) < 8 * n_samples; ++i) {
            if (idx[i] + 1 >= per_axis) continue;
            xn = x;
            xn[i] += box.extent(i) / (per_axis - 1);
            double h1 = p.eval_target_level(xn);
            if ((h0 <= 0.0) == (h1 <= 0.0)) continue;
            Vec mid = x;
            mid[i] += 0.5 * box.extent(i) / (per_axis - 1);
            try {
                BoundaryPoint bp = project_to_boundary(p, mid);
                if (box.contains(bp.x, 1e-9)) out.push_back(std::move(bp));
            } catch (const GeometryError&) {
                // skip cells where the projection fails (e.g. flat gradient)
            }
        }
        int axis = d - 1;
        while (axis >= 0 && ++idx[axis] >= per_axis) idx[axis--] = 0;
        if (axis < 0) break;
    }
    if (out.empty()) throw GeometryError("boundary sampler found no target boundary in the domain box");
    if (static_cast<int>(out.size()) > n_samples) {
        // thin deterministically to the requested count
        std::vector<BoundaryPoint> thin;
        thin.reserve(n_samples);
        double stride = double(out.size()) / n_samples;
        for (int i = 0; i < n_samples; ++i) thin.push_back(out[static_cast<std::size_t>(i * stride)]);
        out = std::move(thin);
    }
    return out;
}

struct PetrovResult {
    double mu_hat = 0.0;
    bool holds = false;
    Vec worst_point;
};

/// Minimum classification margin over sampled boundary points. Petrov's
/// condition holds when the minimum stays above the margin tolerance.
inline PetrovResult petrov_check(const ControlProblem& p, int n_boundary_samples) {
    auto samples = sample_boundary(p, n_boundary_samples);
    PetrovResult res;
    res.mu_hat = std::numeric_limits<double>::infinity();
    for (const auto& bp : samples) {
        if (bp.margin < res.mu_hat) {
            res.mu_hat = bp.margin;
            res.worst_point = bp.x;
        }
    }
    res.holds = res.mu_hat > margin_tol(p);
    return res;
}

}  // namespace exitgrid

#endif
