#ifndef EXITGRID_PROBLEM_HPP
#define EXITGRID_PROBLEM_HPP

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "exitgrid/expression.hpp"
#include "exitgrid/util.hpp"

namespace exitgrid {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Declared problem constants: speed bound N, running-cost floor r0,
/// terminal Lipschitz bound G near the target boundary, and the inner-ball
/// radius rho0 of the target.
struct ProblemConstants {
    double speed_bound = 1.0;        // N
    double run_cost_floor = 1.0;     // r0
    double terminal_lip = 0.0;       // G
    double inner_ball_radius = 1.0;  // rho0
};

/// Exit-time control problem: dynamics f(x,u), running cost r(x,u),
/// terminal cost g(x), target S = {h <= 0}, a finite control sample list,
/// and a computational domain box. Immutable after construction; safe to
/// share across threads.
class ControlProblem {
  public:
    ControlProblem(int dim, int ctrl_dim, std::vector<Expression> f, Expression r, Expression g,
                   Expression h, std::vector<Vec> controls, Box domain, ProblemConstants constants)
        : dim_(dim),
          ctrl_dim_(ctrl_dim),
          f_(std::move(f)),
          r_(std::move(r)),
          g_(std::move(g)),
          h_(std::move(h)),
          controls_(std::move(controls)),
          domain_(std::move(domain)),
          k_(constants) {
        if (dim_ < 1) throw ConfigError("state dimension must be >= 1");
        if (static_cast<int>(f_.size()) != dim_) throw ConfigError("dynamics needs one expression per state dimension");
        if (controls_.empty()) throw ConfigError("control list must be nonempty");
        for (const auto& u : controls_)
            if (static_cast<int>(u.size()) != ctrl_dim_) throw ConfigError("control vector has wrong dimension");
        if (!(k_.run_cost_floor > 0.0)) throw ConfigError("running-cost floor r0 must be positive");
        if (!(k_.terminal_lip < k_.run_cost_floor / k_.speed_bound))
            throw ConfigError("(H3) violated: require G < r0/N, got G = " + std::to_string(k_.terminal_lip) +
                              ", r0/N = " + std::to_string(k_.run_cost_floor / k_.speed_bound));
        if (domain_.dim() != dim_ || domain_.degenerate()) throw ConfigError("domain box is degenerate");
    }

    int dim() const { return dim_; }
    int ctrl_dim() const { return ctrl_dim_; }
    const std::vector<Vec>& controls() const { return controls_; }
    const Box& domain() const { return domain_; }
    const ProblemConstants& constants() const { return k_; }

    void set_dynamics_jacobian(std::vector<Expression> df) { df_ = std::move(df); }
    void set_running_gradient(std::vector<Expression> dr) { dr_ = std::move(dr); }
    void set_terminal_gradient(std::vector<Expression> dg) { dg_ = std::move(dg); }
    void set_target_gradient(std::vector<Expression> dh) { dh_ = std::move(dh); }
    bool has_analytic_jacobian() const { return !df_.empty(); }
    bool has_analytic_running_gradient() const { return !dr_.empty(); }

    /// True when no dynamics component reads the state; per-control values
    /// can then be cached for a whole grid solve.
    bool dynamics_state_free() const {
        for (const auto& e : f_)
            if (e.uses_state()) return false;
        return true;
    }
    bool running_cost_state_free() const { return !r_.uses_state(); }

    void eval_dynamics(std::span<const double> x, std::span<const double> u, std::span<double> out) const {
        for (int i = 0; i < dim_; ++i) out[i] = f_[i].eval(x, u);
    }
    Vec eval_dynamics(std::span<const double> x, std::span<const double> u) const {
        Vec out(dim_);
        eval_dynamics(x, u, out);
        return out;
    }

    double eval_running_cost(std::span<const double> x, std::span<const double> u) const {
        return r_.eval(x, u);
    }
    double eval_terminal_cost(std::span<const double> x) const { return g_.eval(x); }
    double eval_target_level(std::span<const double> x) const { return h_.eval(x); }

    /// d x d Jacobian of f w.r.t. x, row-major. Analytic expressions when
    /// provided, else central differences with step 1e-6*(1+|x|).
    Vec eval_dynamics_jacobian(std::span<const double> x, std::span<const double> u) const {
        Vec jac(static_cast<std::size_t>(dim_) * dim_);
        if (!df_.empty()) {
            for (int i = 0; i < dim_ * dim_; ++i) jac[i] = df_[i].eval(x, u);
            return jac;
        }
        const double step = fd_step(x);
        Vec xp(x.begin(), x.end()), fp(dim_), fm(dim_);
        for (int j = 0; j < dim_; ++j) {
            double save = xp[j];
            xp[j] = save + step;
            eval_dynamics(xp, u, fp);
            xp[j] = save - step;
            eval_dynamics(xp, u, fm);
            xp[j] = save;
            for (int i = 0; i < dim_; ++i) jac[static_cast<std::size_t>(i) * dim_ + j] = (fp[i] - fm[i]) / (2.0 * step);
        }
        return jac;
    }

    Vec eval_running_gradient(std::span<const double> x, std::span<const double> u) const {
        if (!dr_.empty()) {
            Vec g(dim_);
            for (int i = 0; i < dim_; ++i) g[i] = dr_[i].eval(x, u);
            return g;
        }
        return fd_gradient([&](std::span<const double> z) { return r_.eval(z, u); }, x);
    }

    Vec eval_terminal_gradient(std::span<const double> x) const {
        if (!dg_.empty()) {
            Vec g(dim_);
            for (int i = 0; i < dim_; ++i) g[i] = dg_[i].eval(x);
            return g;
        }
        return fd_gradient([&](std::span<const double> z) { return g_.eval(z); }, x);
    }

    Vec eval_target_gradient(std::span<const double> x) const {
        if (!dh_.empty()) {
            Vec g(dim_);
            for (int i = 0; i < dim_; ++i) g[i] = dh_[i].eval(x);
            return g;
        }
        return fd_gradient([&](std::span<const double> z) { return h_.eval(z); }, x);
    }

    const Expression& dynamics_expr(int i) const { return f_[i]; }
    const Expression& running_cost_expr() const { return r_; }
    const Expression& terminal_cost_expr() const { return g_; }
    const Expression& target_level_expr() const { return h_; }

  private:
    static double fd_step(std::span<const double> x) { return 1e-6 * (1.0 + norm(x)); }

    template <typename F>
    Vec fd_gradient(F&& fn, std::span<const double> x) const {
        const double step = fd_step(x);
        Vec g(dim_);
        Vec xp(x.begin(), x.end());
        for (int j = 0; j < dim_; ++j) {
            double save = xp[j];
            xp[j] = save + step;
            double vp = fn(xp);
            xp[j] = save - step;
            double vm = fn(xp);
            xp[j] = save;
            g[j] = (vp - vm) / (2.0 * step);
        }
        return g;
    }

    int dim_, ctrl_dim_;
    std::vector<Expression> f_, df_, dr_, dg_, dh_;
    Expression r_, g_, h_;
    std::vector<Vec> controls_;
    Box domain_;
    ProblemConstants k_;
};

}  // namespace exitgrid

#endif
