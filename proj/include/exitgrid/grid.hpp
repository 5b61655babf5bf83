#ifndef EXITGRID_GRID_HPP
#define EXITGRID_GRID_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "exitgrid/util.hpp"

namespace exitgrid {

class GridError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Sentinel for nodes the sweeps never reached.
inline constexpr double kBig = 1e6;

/// Rectangular node-centered grid: per-axis [lo,hi] with n nodes and
/// uniform spacing (hi-lo)/(n-1). Row-major storage, last axis fastest.
struct Grid {
    Box box;
    std::vector<int> n;
    Vec dx;
    std::vector<std::size_t> stride;

    int dim() const { return box.dim(); }
    std::size_t size() const {
        std::size_t s = 1;
        for (int c : n) s *= static_cast<std::size_t>(c);
        return s;
    }
    double min_spacing() const {
        double m = dx[0];
        for (double v : dx) m = std::min(m, v);
        return m;
    }
    double max_spacing() const {
        double m = dx[0];
        for (double v : dx) m = std::max(m, v);
        return m;
    }

    std::size_t index(std::span<const int> multi) const {
        std::size_t s = 0;
        for (int i = 0; i < dim(); ++i) s += static_cast<std::size_t>(multi[i]) * stride[i];
        return s;
    }
    void unindex(std::size_t flat, std::span<int> multi) const {
        for (int i = 0; i < dim(); ++i) {
            multi[i] = static_cast<int>(flat / stride[i]);
            flat %= stride[i];
        }
    }
    void node(std::span<const int> multi, std::span<double> x) const {
        for (int i = 0; i < dim(); ++i) x[i] = box.lo(i) + multi[i] * dx[i];
    }
    Vec node(std::span<const int> multi) const {
        Vec x(dim());
        node(multi, x);
        return x;
    }
    /// Multi-index of the node nearest to x (clamped to the grid).
    std::vector<int> nearest(std::span<const double> x) const {
        std::vector<int> m(dim());
        for (int i = 0; i < dim(); ++i)
            m[i] = std::clamp(static_cast<int>(std::lround((x[i] - box.lo(i)) / dx[i])), 0, n[i] - 1);
        return m;
    }
};

inline Grid build_grid(const Box& box, const std::vector<int>& n) {
    if (box.degenerate()) throw GridError("grid box is degenerate");
    if (static_cast<int>(n.size()) != box.dim()) throw GridError("node counts do not match box dimension");
    for (int c : n)
        if (c < 3) throw GridError("need at least 3 nodes per axis");
    Grid g;
    g.box = box;
    g.n = n;
    g.dx.resize(box.dim());
    for (int i = 0; i < box.dim(); ++i) g.dx[i] = box.extent(i) / (n[i] - 1);
    g.stride.assign(box.dim(), 1);
    for (int i = box.dim() - 2; i >= 0; --i) g.stride[i] = g.stride[i + 1] * static_cast<std::size_t>(n[i + 1]);
    return g;
}

namespace detail {

/// Multilinear interpolation against a raw value array; out-of-box reads
/// return the impassable-boundary sentinel instead of throwing.
inline double interp_raw(const Grid& g, const Vec& value, std::span<const double> x, bool& outside) {
    const int d = g.dim();
    int base[8];
    double w[8];
    for (int i = 0; i < d; ++i) {
        if (x[i] < g.box.lo(i) || x[i] > g.box.hi(i)) {
            outside = true;
            return kBig;
        }
        double t = (x[i] - g.box.lo(i)) / g.dx[i];
        int c = std::clamp(static_cast<int>(std::floor(t)), 0, g.n[i] - 2);
        base[i] = c;
        w[i] = std::clamp(t - c, 0.0, 1.0);
    }
    outside = false;
    double acc = 0.0;
    for (int c = 0; c < (1 << d); ++c) {
        double weight = 1.0;
        std::size_t flat = 0;
        for (int i = 0; i < d; ++i) {
            int bit = (c >> i) & 1;
            weight *= bit ? w[i] : 1.0 - w[i];
            flat += static_cast<std::size_t>(base[i] + bit) * g.stride[i];
        }
        if (weight > 0.0) acc += weight * value[flat];
    }
    return acc;
}

}  // namespace detail

enum class NodeStatus : std::uint8_t { Target, Converged, Unreached };

inline const char* to_string(NodeStatus s) {
    switch (s) {
        case NodeStatus::Target: return "TARGET";
        case NodeStatus::Converged: return "CONVERGED";
        case NodeStatus::Unreached: return "UNREACHED";
    }
    return "?";
}

/// Grid values of the value function plus per-node status and iteration
/// statistics from the sweeping solver.
struct ValueField {
    Grid grid;
    Vec value;
    std::vector<NodeStatus> status;
    int sweeps_used = 0;
    double final_change = 0.0;
    double solve_seconds = 0.0;
};

/// Multilinear interpolation of node values at x. Throws when x leaves the
/// grid box (beyond a relative epsilon used to absorb roundoff).
inline double interpolate(const ValueField& field, std::span<const double> x) {
    const Grid& g = field.grid;
    const int d = g.dim();
    int base[8];
    double w[8];
    if (d > 8) throw GridError("interpolation supports up to 8 dimensions");
    for (int i = 0; i < d; ++i) {
        double eps = 1e-9 * (1.0 + std::fabs(g.box.lo(i)) + std::fabs(g.box.hi(i)));
        if (x[i] < g.box.lo(i) - eps || x[i] > g.box.hi(i) + eps) throw GridError("interpolation point outside grid box");
        double t = (x[i] - g.box.lo(i)) / g.dx[i];
        int c = std::clamp(static_cast<int>(std::floor(t)), 0, g.n[i] - 2);
        base[i] = c;
        w[i] = std::clamp(t - c, 0.0, 1.0);
    }
    double acc = 0.0;
    const int corners = 1 << d;
    for (int c = 0; c < corners; ++c) {
        double weight = 1.0;
        std::size_t flat = 0;
        for (int i = 0; i < d; ++i) {
            int bit = (c >> i) & 1;
            weight *= bit ? w[i] : 1.0 - w[i];
            flat += static_cast<std::size_t>(base[i] + bit) * g.stride[i];
        }
        if (weight > 0.0) acc += weight * field.value[flat];
    }
    return acc;
}

struct NumericGradient {
    Vec central, forward, backward;
};

/// Per-axis one-sided and central difference quotients of interpolated
/// values, with spacing-sized probes. Requires x one spacing inside the box
/// and refuses stencils touching unreached nodes.
inline NumericGradient numeric_gradient(const ValueField& field, std::span<const double> x) {
    const Grid& g = field.grid;
    const int d = g.dim();
    for (int i = 0; i < d; ++i)
        if (x[i] < g.box.lo(i) + g.dx[i] * (1.0 - 1e-9) || x[i] > g.box.hi(i) - g.dx[i] * (1.0 - 1e-9))
            throw GridError("gradient probe too close to the grid boundary");
    // reject stencils whose interpolation cells touch unreached nodes
    auto cell_ok = [&](std::span<const double> z) {
        int base[8];
        for (int i = 0; i < d; ++i) {
            double t = (z[i] - g.box.lo(i)) / g.dx[i];
            base[i] = std::clamp(static_cast<int>(std::floor(t)), 0, g.n[i] - 2);
        }
        const int corners = 1 << d;
        for (int c = 0; c < corners; ++c) {
            std::size_t flat = 0;
            for (int i = 0; i < d; ++i) flat += static_cast<std::size_t>(base[i] + ((c >> i) & 1)) * g.stride[i];
            if (field.status[flat] == NodeStatus::Unreached) return false;
        }
        return true;
    };

    NumericGradient ng;
    ng.central.resize(d);
    ng.forward.resize(d);
    ng.backward.resize(d);
    Vec z(x.begin(), x.end());
    if (!cell_ok(z)) throw GridError("gradient stencil touches unreached region");
    double v0 = interpolate(field, z);
    for (int i = 0; i < d; ++i) {
        double h = g.dx[i];
        z[i] = x[i] + h;
        if (!cell_ok(z)) throw GridError("gradient stencil touches unreached region");
        double vp = interpolate(field, z);
        z[i] = x[i] - h;
        if (!cell_ok(z)) throw GridError("gradient stencil touches unreached region");
        double vm = interpolate(field, z);
        z[i] = x[i];
        ng.forward[i] = (vp - v0) / h;
        ng.backward[i] = (v0 - vm) / h;
        ng.central[i] = (vp - vm) / (2.0 * h);
    }
    return ng;
}

/// Mask of nodes with V <= alpha (unreached nodes never qualify).
inline std::vector<std::uint8_t> sublevel_mask(const ValueField& field, double alpha) {
    std::vector<std::uint8_t> mask(field.value.size(), 0);
    for (std::size_t i = 0; i < field.value.size(); ++i)
        mask[i] = field.status[i] != NodeStatus::Unreached && field.value[i] <= alpha ? 1 : 0;
    return mask;
}

}  // namespace exitgrid

#endif
