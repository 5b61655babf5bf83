#ifndef EXITGRID_IO_HPP
#define EXITGRID_IO_HPP

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "exitgrid/arcs.hpp"
#include "exitgrid/benchmarks.hpp"
#include "exitgrid/geometry.hpp"
#include "exitgrid/grid.hpp"
#include "exitgrid/regularity.hpp"

namespace exitgrid {

class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Shortest-exact double formatting so reruns are byte-identical.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    return os;
}

}  // namespace detail

/// Field CSV: header "x1,...,xd,value,status", one row per node in
/// row-major order.
inline void write_field_csv(const ValueField& field, const std::string& path) {
    auto os = detail::open_out(path);
    const Grid& g = field.grid;
    for (int i = 0; i < g.dim(); ++i) os << "x" << i + 1 << ",";
    os << "value,status\n";
    std::vector<int> mi(g.dim());
    Vec x(g.dim());
    for (std::size_t flat = 0; flat < field.value.size(); ++flat) {
        g.unindex(flat, mi);
        g.node(mi, x);
        for (int i = 0; i < g.dim(); ++i) os << detail::fmt(x[i]) << ",";
        os << detail::fmt(field.value[flat]) << "," << to_string(field.status[flat]) << "\n";
    }
}

/// Binary field dump: magic "EXGF", version byte, dimension byte, per-axis
/// node counts (u32) and bounds (f64 lo, hi), then the node values as
/// little-endian 64-bit floats in row-major order.
inline void write_field_exgf(const ValueField& field, const std::string& path) {
    static_assert(std::endian::native == std::endian::little, "EXGF writer assumes a little-endian host");
    auto os = detail::open_out(path, true);
    const Grid& g = field.grid;
    os.write("EXGF", 4);
    std::uint8_t version = 1, dim = static_cast<std::uint8_t>(g.dim());
    os.write(reinterpret_cast<const char*>(&version), 1);
    os.write(reinterpret_cast<const char*>(&dim), 1);
    for (int i = 0; i < g.dim(); ++i) {
        std::uint32_t n = static_cast<std::uint32_t>(g.n[i]);
        os.write(reinterpret_cast<const char*>(&n), 4);
    }
    for (int i = 0; i < g.dim(); ++i) {
        double lo = g.box.lo(i), hi = g.box.hi(i);
        os.write(reinterpret_cast<const char*>(&lo), 8);
        os.write(reinterpret_cast<const char*>(&hi), 8);
    }
    os.write(reinterpret_cast<const char*>(field.value.data()),
             static_cast<std::streamsize>(field.value.size() * sizeof(double)));
}

inline ValueField read_field_exgf(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (std::memcmp(magic, "EXGF", 4) != 0) throw IoError("bad magic in '" + path + "'");
    std::uint8_t version = 0, dim = 0;
    is.read(reinterpret_cast<char*>(&version), 1);
    is.read(reinterpret_cast<char*>(&dim), 1);
    if (version != 1) throw IoError("unsupported EXGF version");
    std::vector<int> n(dim);
    for (int i = 0; i < dim; ++i) {
        std::uint32_t c = 0;
        is.read(reinterpret_cast<char*>(&c), 4);
        n[i] = static_cast<int>(c);
    }
    Box box;
    for (int i = 0; i < dim; ++i) {
        double lo = 0, hi = 0;
        is.read(reinterpret_cast<char*>(&lo), 8);
        is.read(reinterpret_cast<char*>(&hi), 8);
        box.axes.push_back({lo, hi});
    }
    ValueField field;
    field.grid = build_grid(box, n);
    field.value.resize(field.grid.size());
    is.read(reinterpret_cast<char*>(field.value.data()),
            static_cast<std::streamsize>(field.value.size() * sizeof(double)));
    if (!is) throw IoError("truncated EXGF file '" + path + "'");
    field.status.assign(field.value.size(), NodeStatus::Converged);
    for (std::size_t i = 0; i < field.value.size(); ++i)
        if (field.value[i] >= kBig / 2) field.status[i] = NodeStatus::Unreached;
    return field;
}

/// Arc CSV: "t, y1..yd, p1..pd, u_index, H_residual, degenerate".
inline void write_arc_csv(const ControlProblem& p, const ExtremalArc& arc, const std::string& path) {
    auto os = detail::open_out(path);
    const int d = static_cast<int>(arc.y.empty() ? 0 : arc.y.front().size());
    os << "t";
    for (int i = 0; i < d; ++i) os << ",y" << i + 1;
    for (int i = 0; i < d; ++i) os << ",p" << i + 1;
    os << ",u_index,H_residual,degenerate\n";
    for (std::size_t k = 0; k < arc.t.size(); ++k) {
        double res = arc.kind == ArcKind::NonHorizontal ? hamiltonian(p, arc.y[k], arc.p[k]).value
                                                        : horizontal_hamiltonian(p, arc.y[k], arc.p[k]).value;
        os << detail::fmt(arc.t[k]);
        for (int i = 0; i < d; ++i) os << "," << detail::fmt(arc.y[k][i]);
        for (int i = 0; i < d; ++i) os << "," << detail::fmt(arc.p[k][i]);
        os << "," << arc.u_index[k] << "," << detail::fmt(res) << "," << int(arc.degenerate[k]) << "\n";
    }
}

/// Trajectory CSV: "t, y1..yd, u_index".
inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    auto os = detail::open_out(path);
    const int d = static_cast<int>(traj.y.empty() ? 0 : traj.y.front().size());
    os << "t";
    for (int i = 0; i < d; ++i) os << ",y" << i + 1;
    os << ",u_index\n";
    for (std::size_t k = 0; k < traj.y.size(); ++k) {
        os << detail::fmt(traj.t[k]);
        for (int i = 0; i < d; ++i) os << "," << detail::fmt(traj.y[k][i]);
        os << "," << (k < traj.u_index.size() ? traj.u_index[k] : -1) << "\n";
    }
}

/// Boundary sample CSV: "x1..xd, xi1..xid, margin, class".
inline void write_boundary_csv(const std::vector<BoundaryPoint>& samples, const std::string& path) {
    if (samples.empty()) throw IoError("no boundary samples to write");
    auto os = detail::open_out(path);
    const int d = static_cast<int>(samples.front().x.size());
    for (int i = 0; i < d; ++i) os << "x" << i + 1 << ",";
    for (int i = 0; i < d; ++i) os << "xi" << i + 1 << ",";
    os << "margin,class\n";
    for (const auto& bp : samples) {
        for (int i = 0; i < d; ++i) os << detail::fmt(bp.x[i]) << ",";
        for (int i = 0; i < d; ++i) os << detail::fmt(bp.normal[i]) << ",";
        os << detail::fmt(bp.margin) << "," << to_string(bp.cls) << "\n";
    }
}

/// Sweep polylines: "curve_id, k, x1..xd"; degenerate points use id -1.
inline void write_polylines_csv(const SweepResult& sweep, int dim, const std::string& path) {
    auto os = detail::open_out(path);
    os << "curve_id,k";
    for (int i = 0; i < dim; ++i) os << ",x" << i + 1;
    os << "\n";
    for (std::size_t c = 0; c < sweep.curves.size(); ++c)
        for (std::size_t k = 0; k < sweep.curves[c].size(); ++k) {
            os << c << "," << k;
            for (int i = 0; i < dim; ++i) os << "," << detail::fmt(sweep.curves[c][k][i]);
            os << "\n";
        }
    for (std::size_t k = 0; k < sweep.degenerate_points.size(); ++k) {
        os << -1 << "," << k;
        for (int i = 0; i < dim; ++i) os << "," << detail::fmt(sweep.degenerate_points[k][i]);
        os << "\n";
    }
}

/// Detector masks, one row per node: "x1..xd, sigma, sigma_inf".
inline void write_masks_csv(const ValueField& field, const std::vector<std::uint8_t>& sigma,
                            const std::vector<std::uint8_t>& sigma_inf, const std::string& path) {
    auto os = detail::open_out(path);
    const Grid& g = field.grid;
    for (int i = 0; i < g.dim(); ++i) os << "x" << i + 1 << ",";
    os << "sigma,sigma_inf\n";
    std::vector<int> mi(g.dim());
    Vec x(g.dim());
    for (std::size_t flat = 0; flat < field.value.size(); ++flat) {
        g.unindex(flat, mi);
        g.node(mi, x);
        for (int i = 0; i < g.dim(); ++i) os << detail::fmt(x[i]) << ",";
        os << int(sigma[flat]) << "," << int(sigma_inf[flat]) << "\n";
    }
}

inline void write_convergence_csv(const std::vector<ConvergenceRow>& rows, const std::string& path) {
    auto os = detail::open_out(path);
    os << "n,nodes,linf,l1,sweeps\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.n.size(); ++i) os << (i ? "x" : "") << r.n[i];
        os << "," << r.nodes << "," << detail::fmt(r.linf) << "," << detail::fmt(r.l1) << "," << r.sweeps << "\n";
    }
}

/// Run-length encoding of a node mask over the row-major flat index:
/// list of [start, length] pairs.
inline nlohmann::json rle_mask(const std::vector<std::uint8_t>& mask) {
    nlohmann::json runs = nlohmann::json::array();
    std::size_t i = 0;
    while (i < mask.size()) {
        if (!mask[i]) {
            ++i;
            continue;
        }
        std::size_t start = i;
        while (i < mask.size() && mask[i]) ++i;
        runs.push_back({start, i - start});
    }
    return runs;
}

inline nlohmann::json report_to_json(const RegularityReport& rep) {
    nlohmann::json j;
    j["grid_n"] = rep.grid_n;
    j["sigma_mask_rle"] = rle_mask(rep.sigma_mask);
    j["sigma_inf_mask_rle"] = rle_mask(rep.sigma_inf_mask);
    j["sigma_area_fraction"] = rep.sigma_area_fraction;
    j["sigma_inf_area_fraction"] = rep.sigma_inf_area_fraction;
    j["semiconcavity_unrestricted"] = rep.semiconcavity_unrestricted;
    j["semiconcavity_masked"] = rep.semiconcavity_masked;
    j["points"] = nlohmann::json::array();
    for (const auto& pd : rep.points) {
        nlohmann::json pj;
        pj["x"] = pd.x;
        pj["pointed"] = pd.pointed;
        pj["min_norm"] = pd.min_norm;
        pj["hypograph_differentiable"] = pd.hypograph_differentiable;
        pj["direction"] = pd.direction;
        pj["min_exterior_radius"] =
            std::isfinite(pd.min_exterior_radius) ? nlohmann::json(pd.min_exterior_radius) : nlohmann::json("inf");
        pj["dist_p_deg"] = pd.dist_p_deg;
        pj["dist_inf_deg"] = pd.dist_inf_deg;
        pj["n_grads"] = pd.n_grads;
        pj["n_hgrads"] = pd.n_hgrads;
        pj["n1_count"] = pd.n1_count;
        pj["n0_count"] = pd.n0_count;
        j["points"].push_back(std::move(pj));
    }
    return j;
}

inline void write_json(const nlohmann::json& j, const std::string& path) {
    auto os = detail::open_out(path);
    os << j.dump(2) << "\n";
}

/// gnuplot heat-map script for a 2-d field CSV, with relative paths.
inline void write_field_gnuplot(const ValueField& field, const std::string& csv_name, const std::string& path) {
    if (field.grid.dim() != 2) return;
    auto os = detail::open_out(path);
    os << "set datafile separator ','\n"
       << "set view map\n"
       << "set size ratio -1\n"
       << "set palette rgbformulae 33,13,10\n"
       << "splot '" << csv_name << "' every ::1 using 1:2:($3 > " << detail::fmt(kBig / 2)
       << " ? 1/0 : $3) with points pt 5 ps 0.4 palette notitle\n"
       << "pause -1 'press enter'\n";
}

}  // namespace exitgrid

#endif
