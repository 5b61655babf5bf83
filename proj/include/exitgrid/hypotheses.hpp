#ifndef EXITGRID_HYPOTHESES_HPP
#define EXITGRID_HYPOTHESES_HPP

#include <limits>
#include <string>
#include <vector>

#include "exitgrid/geometry.hpp"
#include "exitgrid/problem.hpp"

namespace exitgrid {

enum class CheckStatus { Pass, Fail, Unchecked };

inline const char* to_string(CheckStatus s) {
    switch (s) {
        case CheckStatus::Pass: return "pass";
        case CheckStatus::Fail: return "fail";
        case CheckStatus::Unchecked: return "unchecked";
    }
    return "?";
}

struct HypothesisCheck {
    CheckStatus status = CheckStatus::Unchecked;
    std::string detail;
    Vec witness;  // sample point exhibiting a failure, when status == Fail
};

/// Monte-Carlo validation report for the standing hypotheses: convex
/// augmented velocity set (H0), bounded Lipschitz dynamics (H1), running
/// cost floor and smoothness (H2), terminal Lipschitz bound near the
/// boundary (H3), and the target inner-ball property (H4).
struct HypothesisReport {
    HypothesisCheck h0, h1, h2, h3, h4;
    double sup_f = 0.0;
    double lip_f = 0.0, lip_df = 0.0;
    double min_r = std::numeric_limits<double>::infinity();
    double lip_r = 0.0, lip_dr = 0.0;
    double lip_g_boundary = 0.0;
    double min_inner_ball = std::numeric_limits<double>::infinity();
    int samples = 0;

    bool all_checked_pass() const {
        for (const HypothesisCheck* c : {&h0, &h1, &h2, &h3, &h4})
            if (c->status == CheckStatus::Fail) return false;
        return true;
    }
};

struct HypothesisOptions {
    /// The convexity test (H0) is opt-in: finite control sampling makes it
    /// fail for velocity sets that are only convex after relaxation, and
    /// the report must not block on that.
    bool check_h0 = false;
    double h0_tol_factor = 0.15;  // tolerance = factor * N
    int boundary_samples = 64;
};

inline HypothesisReport validate_hypotheses(const ControlProblem& p, int n_samples, std::uint64_t seed,
                                            HypothesisOptions opts = {}) {
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    HypothesisReport rep;
    rep.samples = n_samples;
    Rng rng(seed);
    const int d = p.dim();
    const auto& K = p.constants();
    Vec f(d), f2(d);

    // (H1)/(H2): sup |f|, cost floor, Lipschitz quotients on sample pairs
    for (int s = 0; s < n_samples; ++s) {
        Vec x = rng.point_in_box(p.domain());
        for (const auto& u : p.controls()) {
            p.eval_dynamics(x, u, f);
            double nf = norm(f);
            if (nf > rep.sup_f) {
                rep.sup_f = nf;
                if (nf >= K.speed_bound && rep.h1.status != CheckStatus::Fail) {
                    rep.h1.status = CheckStatus::Fail;
                    rep.h1.detail = "|f| = " + std::to_string(nf) + " >= N = " + std::to_string(K.speed_bound);
                    rep.h1.witness = x;
                }
            }
            double r = p.eval_running_cost(x, u);
            if (r < rep.min_r) {
                rep.min_r = r;
                if (r < K.run_cost_floor - 1e-12 && rep.h2.status != CheckStatus::Fail) {
                    rep.h2.status = CheckStatus::Fail;
                    rep.h2.detail = "r = " + std::to_string(r) + " < r0 = " + std::to_string(K.run_cost_floor);
                    rep.h2.witness = x;
                }
            }
        }
    }
    int n_pairs = std::max(8, n_samples / 10);
    for (int s = 0; s < n_pairs; ++s) {
        Vec x = rng.point_in_box(p.domain());
        Vec dir = rng.direction(d);
        double step = rng.uniform(1e-4, 0.05) * p.domain().diameter();
        Vec y = x;
        axpy(step, dir, y);
        if (!p.domain().contains(y)) continue;
        double h = dist(x, y);
        for (const auto& u : p.controls()) {
            p.eval_dynamics(x, u, f);
            p.eval_dynamics(y, u, f2);
            rep.lip_f = std::max(rep.lip_f, dist(f, f2) / h);
            Vec jx = p.eval_dynamics_jacobian(x, u);
            Vec jy = p.eval_dynamics_jacobian(y, u);
            rep.lip_df = std::max(rep.lip_df, dist(jx, jy) / h);
            rep.lip_r =
                std::max(rep.lip_r, std::fabs(p.eval_running_cost(x, u) - p.eval_running_cost(y, u)) / h);
            Vec gx = p.eval_running_gradient(x, u);
            Vec gy = p.eval_running_gradient(y, u);
            rep.lip_dr = std::max(rep.lip_dr, dist(gx, gy) / h);
        }
    }
    if (!std::isfinite(rep.lip_f) || !std::isfinite(rep.lip_df)) {
        rep.h1.status = CheckStatus::Fail;
        rep.h1.detail = "non-finite Lipschitz quotient for f or Dxf";
    }
    if (rep.h1.status == CheckStatus::Unchecked) rep.h1.status = CheckStatus::Pass;
    if (!std::isfinite(rep.lip_r) || !std::isfinite(rep.lip_dr)) {
        rep.h2.status = CheckStatus::Fail;
        rep.h2.detail = "non-finite Lipschitz quotient for r or Dxr";
    }
    if (rep.h2.status == CheckStatus::Unchecked) rep.h2.status = CheckStatus::Pass;

    // (H3)/(H4): sample the target boundary
    std::vector<BoundaryPoint> boundary;
    try {
        boundary = sample_boundary(p, opts.boundary_samples);
    } catch (const GeometryError& e) {
        rep.h3.status = CheckStatus::Unchecked;
        rep.h3.detail = e.what();
        rep.h4.status = CheckStatus::Unchecked;
        rep.h4.detail = e.what();
    }
    if (!boundary.empty()) {
        double scale = 0.05 * p.domain().diameter();
        for (const auto& bp : boundary) {
            for (int rep_i = 0; rep_i < 4; ++rep_i) {
                Vec a = bp.x, b = bp.x;
                axpy(rng.uniform(0.0, scale), rng.direction(d), a);
                axpy(rng.uniform(0.0, scale), rng.direction(d), b);
                double dd = dist(a, b);
                if (dd < 1e-12) continue;
                double q = std::fabs(p.eval_terminal_cost(a) - p.eval_terminal_cost(b)) / dd;
                rep.lip_g_boundary = std::max(rep.lip_g_boundary, q);
                if (q > K.terminal_lip + 1e-9 * (1.0 + K.terminal_lip) && rep.h3.status != CheckStatus::Fail) {
                    rep.h3.status = CheckStatus::Fail;
                    rep.h3.detail = "|g| quotient " + std::to_string(q) + " exceeds G = " + std::to_string(K.terminal_lip);
                    rep.h3.witness = a;
                }
            }
        }
        if (rep.h3.status == CheckStatus::Unchecked) rep.h3.status = CheckStatus::Pass;

        double search = 0.25 * p.domain().diameter();
        for (const auto& bp : boundary) {
            double rho = inner_ball_radius(p, bp, search, 4096);
            rep.min_inner_ball = std::min(rep.min_inner_ball, rho);
            if (rho < 0.9 * K.inner_ball_radius && rep.h4.status != CheckStatus::Fail) {
                rep.h4.status = CheckStatus::Fail;
                rep.h4.detail = "inner-ball estimate " + std::to_string(rho) + " below rho0 = " +
                                std::to_string(K.inner_ball_radius);
                rep.h4.witness = bp.x;
            }
        }
        if (rep.h4.status == CheckStatus::Unchecked) rep.h4.status = CheckStatus::Pass;
    }

    // (H0), opt-in: midpoints of sampled augmented velocities must stay
    // close to the sampled set
    if (opts.check_h0) {
        double tol = opts.h0_tol_factor * K.speed_bound;
        int n_h0 = std::max(16, n_samples / 100);
        Vec fm(d);
        for (int s = 0; s < n_h0 && rep.h0.status != CheckStatus::Fail; ++s) {
            Vec x = rng.point_in_box(p.domain());
            int a = rng.index(static_cast<int>(p.controls().size()));
            int b = rng.index(static_cast<int>(p.controls().size()));
            p.eval_dynamics(x, p.controls()[a], f);
            p.eval_dynamics(x, p.controls()[b], f2);
            Vec mid = scaled(add(f, f2), 0.5);
            double mid_r = 0.5 * (p.eval_running_cost(x, p.controls()[a]) + p.eval_running_cost(x, p.controls()[b]));
            bool found = false;
            for (const auto& u : p.controls()) {
                p.eval_dynamics(x, u, fm);
                if (dist(fm, mid) <= tol && p.eval_running_cost(x, u) <= mid_r + tol) {
                    found = true;
                    break;
                }
            }
            if (!found) {
                rep.h0.status = CheckStatus::Fail;
                rep.h0.detail = "midpoint of sampled velocities has no nearby sample (controls " +
                                std::to_string(a) + ", " + std::to_string(b) + ")";
                rep.h0.witness = x;
            }
        }
        if (rep.h0.status == CheckStatus::Unchecked) rep.h0.status = CheckStatus::Pass;
    }
    return rep;
}

}  // namespace exitgrid

#endif
