#ifndef EXITGRID_HAMILTONIAN_HPP
#define EXITGRID_HAMILTONIAN_HPP

#include <limits>
#include <span>
#include <vector>

#include "exitgrid/problem.hpp"

namespace exitgrid {

class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Value of a control-set maximum together with every control attaining it
/// within the tie tolerance. Ties are reported, never silently broken.
struct HamiltonianValue {
    double value = 0.0;
    std::vector<int> argmax;  // indices into the problem's control list
    bool unique = true;
};

inline constexpr double kTieTol = 1e-9;

/// H(x,q) = max over the control list of -q . f(x,w) - r(x,w).
inline HamiltonianValue hamiltonian(const ControlProblem& p, std::span<const double> x,
                                    std::span<const double> q, double tie_tol = kTieTol) {
    HamiltonianValue hv;
    hv.value = -std::numeric_limits<double>::infinity();
    Vec f(p.dim());
    std::vector<double> vals(p.controls().size());
    for (std::size_t k = 0; k < p.controls().size(); ++k) {
        p.eval_dynamics(x, p.controls()[k], f);
        vals[k] = -dot(q, f) - p.eval_running_cost(x, p.controls()[k]);
        hv.value = std::max(hv.value, vals[k]);
    }
    for (std::size_t k = 0; k < vals.size(); ++k)
        if (vals[k] >= hv.value - tie_tol) hv.argmax.push_back(static_cast<int>(k));
    hv.unique = hv.argmax.size() == 1;
    return hv;
}

/// H0(x,q) = max over the control list of -q . f(x,w).
inline HamiltonianValue horizontal_hamiltonian(const ControlProblem& p, std::span<const double> x,
                                               std::span<const double> q, double tie_tol = kTieTol) {
    HamiltonianValue hv;
    hv.value = -std::numeric_limits<double>::infinity();
    Vec f(p.dim());
    std::vector<double> vals(p.controls().size());
    for (std::size_t k = 0; k < p.controls().size(); ++k) {
        p.eval_dynamics(x, p.controls()[k], f);
        vals[k] = -dot(q, f);
        hv.value = std::max(hv.value, vals[k]);
    }
    for (std::size_t k = 0; k < vals.size(); ++k)
        if (vals[k] >= hv.value - tie_tol) hv.argmax.push_back(static_cast<int>(k));
    hv.unique = hv.argmax.size() == 1;
    return hv;
}

/// Solves H(x*, q* - lambda xi) = 0 for the positive terminal multiplier.
/// phi(lambda) grows at rate >= margin once lambda is large, so a bracket
/// seeded at r0/margin and doubled always captures the root; bisection
/// then drives the residual below tol.
inline double solve_terminal_multiplier(const ControlProblem& p, std::span<const double> xstar,
                                        std::span<const double> xi, std::span<const double> qstar,
                                        double tol = 1e-10) {
    Vec f(p.dim());
    double margin = -std::numeric_limits<double>::infinity();
    for (const auto& u : p.controls()) {
        p.eval_dynamics(xstar, u, f);
        margin = std::max(margin, dot(xi, f));
    }
    const double tol_m = 1e-6 * p.constants().speed_bound;
    if (margin <= tol_m)
        throw NumericalError("tangential normal: terminal multiplier needs a transversal boundary point");

    Vec q(p.dim());
    auto phi = [&](double lam) {
        for (int i = 0; i < p.dim(); ++i) q[i] = qstar[i] - lam * xi[i];
        return hamiltonian(p, xstar, q).value;
    };

    double lo = 0.0, phi_lo = phi(0.0);
    if (phi_lo > tol) throw NumericalError("terminal data inconsistent: H(x*, q*) > 0");
    if (std::fabs(phi_lo) <= tol) return 0.0;
    double hi = p.constants().run_cost_floor / margin, phi_hi = phi(hi);
    for (int it = 0; it < 80 && phi_hi < 0.0; ++it) {
        lo = hi;
        phi_lo = phi_hi;
        hi *= 2.0;
        phi_hi = phi(hi);
    }
    if (phi_hi < 0.0) throw NumericalError("terminal multiplier bracket failed");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double pm = phi(mid);
        if (std::fabs(pm) <= tol) return mid;
        if (pm < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    double lam = 0.5 * (lo + hi);
    if (std::fabs(phi(lam)) > tol) throw NumericalError("terminal multiplier did not reach residual tolerance");
    return lam;
}

}  // namespace exitgrid

#endif
