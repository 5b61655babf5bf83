#ifndef EXITGRID_UTIL_HPP
#define EXITGRID_UTIL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace exitgrid {

using Vec = std::vector<double>;

/// Axis-aligned box, one [lo,hi] pair per dimension.
struct Box {
    std::vector<std::array<double, 2>> axes;

    int dim() const { return static_cast<int>(axes.size()); }
    double lo(int i) const { return axes[i][0]; }
    double hi(int i) const { return axes[i][1]; }
    double extent(int i) const { return axes[i][1] - axes[i][0]; }

    bool contains(std::span<const double> x, double margin = 0.0) const {
        for (int i = 0; i < dim(); ++i)
            if (x[i] < axes[i][0] - margin || x[i] > axes[i][1] + margin) return false;
        return true;
    }
    double diameter() const {
        double s = 0.0;
        for (auto& a : axes) s += (a[1] - a[0]) * (a[1] - a[0]);
        return std::sqrt(s);
    }
    bool degenerate() const {
        for (auto& a : axes)
            if (!(a[1] > a[0])) return true;
        return axes.empty();
    }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return dot(a, a); }
inline double norm(std::span<const double> a) { return std::sqrt(norm2(a)); }

inline Vec sub(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec add(std::span<const double> a, std::span<const double> b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec scaled(std::span<const double> a, double c) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = c * a[i];
    return r;
}

/// y += c * x
inline void axpy(double c, std::span<const double> x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += c * x[i];
}

inline double dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline Vec unit(std::span<const double> a) {
    double n = norm(a);
    if (n == 0.0) throw std::domain_error("cannot normalize zero vector");
    return scaled(a, 1.0 / n);
}

/// Angle between two nonzero vectors, in degrees.
inline double angle_deg(std::span<const double> a, std::span<const double> b) {
    double c = dot(a, b) / (norm(a) * norm(b));
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c) * 180.0 / M_PI;
}

/// Real (sign-preserving) cube root.
inline double real_cbrt(double x) { return std::cbrt(x); }

/// Seeded RNG wrapper so every sampling routine is reproducible.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double a, double b) {
        std::uniform_real_distribution<double> d(a, b);
        return d(gen_);
    }
    int index(int n) {
        std::uniform_int_distribution<int> d(0, n - 1);
        return d(gen_);
    }
    Vec point_in_box(const Box& box) {
        Vec x(box.dim());
        for (int i = 0; i < box.dim(); ++i) x[i] = uniform(box.lo(i), box.hi(i));
        return x;
    }
    /// Uniform direction on the unit sphere in R^d.
    Vec direction(int d) {
        std::normal_distribution<double> g(0.0, 1.0);
        Vec v(d);
        double n = 0.0;
        do {
            for (int i = 0; i < d; ++i) v[i] = g(gen_);
            n = norm(v);
        } while (n < 1e-12);
        return scaled(v, 1.0 / n);
    }
    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
};

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * (n == 1 ? 0.0 : double(i) / (n - 1));
    return v;
}

/// k evenly spaced directions on the unit circle, starting at (1,0).
inline std::vector<Vec> unit_circle_points(int k) {
    std::vector<Vec> pts(k);
    for (int i = 0; i < k; ++i) {
        double th = 2.0 * M_PI * i / k;
        pts[i] = {std::cos(th), std::sin(th)};
    }
    return pts;
}

/// Quasi-uniform points on the unit sphere in R^3 (Fibonacci lattice).
inline std::vector<Vec> fibonacci_sphere_points(int k) {
    std::vector<Vec> pts(k);
    const double ga = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < k; ++i) {
        double z = 1.0 - 2.0 * (i + 0.5) / k;
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        double th = ga * i;
        pts[i] = {r * std::cos(th), r * std::sin(th), z};
    }
    return pts;
}

/// k evenly spaced samples of [-1,1] (endpoints included).
inline std::vector<Vec> interval_points(int k) {
    std::vector<Vec> pts(k);
    for (int i = 0; i < k; ++i) pts[i] = {k == 1 ? 0.0 : -1.0 + 2.0 * i / (k - 1)};
    return pts;
}

/// Worker count: EXITGRID_THREADS caps hardware concurrency.
inline int worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("EXITGRID_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(v));
    }
    return static_cast<int>(hw);
}

}  // namespace exitgrid

#endif
