#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "kdtree.hpp"
#include "rng.hpp"
#include "surface.hpp"

namespace surfgal {

enum class NodeRole { TrialCenters, QuadratureNodes, EvaluationNodes };

struct NodeSet {
    std::vector<Vec3> points;
    NodeRole role = NodeRole::TrialCenters;
    double h = std::numeric_limits<double>::quiet_NaN();  // fill distance estimate
    double q = std::numeric_limits<double>::quiet_NaN();  // separation distance

    std::size_t size() const noexcept { return points.size(); }
};

struct MeshQuality {
    double h;    // fill distance (chordal)
    double q;    // separation distance (chordal)
    double rho;  // mesh ratio h / q
};

/// Fill distance of `nodes` measured over the dense `probe` sampling, half the
/// minimum pairwise node distance, and their ratio.  All distances are chordal.
inline MeshQuality fill_and_separation(const NodeSet& nodes, const NodeSet& probe) {
    if (nodes.points.size() < 2) throw EmptyInput("separation distance needs at least two nodes");
    if (probe.points.empty()) throw EmptyInput("probe set is empty");
    const KdTree tree(nodes.points);
    double h2 = 0.0;
    for (const auto& p : probe.points) h2 = std::max(h2, tree.knn(p, 1).front().dist2);
    double q2 = std::numeric_limits<double>::infinity();
    for (const auto& p : nodes.points) q2 = std::min(q2, tree.knn(p, 2).back().dist2);
    if (q2 == 0.0) throw EmptyInput("node set contains duplicate points");
    const double h = std::sqrt(h2), q = 0.5 * std::sqrt(q2);
    return {h, q, h / q};
}

/// Spiral lattice on the unit sphere: z_i = 1 - (2i+1)/n, azimuth i * golden angle.
inline std::vector<Vec3> fibonacci_sphere(std::size_t n) {
    std::vector<Vec3> pts(n);
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * static_cast<double>(i);
        pts[i] = Vec3(r * std::cos(phi), r * std::sin(phi), z).normalized();
    }
    return pts;
}

/// Parameter grid sizes (nu, nv) for periodic surfaces so that the grid spacing
/// is roughly isotropic and nu * nv is close to n.
inline std::pair<std::size_t, std::size_t> grid_shape(const SurfaceModel& s, std::size_t n) {
    constexpr int samples = 64;
    double lu = 0, lv = 0;
    for (int i = 0; i < samples; ++i) {
        for (int j = 0; j < samples; ++j) {
            const double u = 2 * std::numbers::pi * i / samples, v = 2 * std::numbers::pi * j / samples;
            const double du = 2 * std::numbers::pi / samples;
            lu += (s.parametrize(u + du, v) - s.parametrize(u, v)).norm();
            lv += (s.parametrize(u, v + du) - s.parametrize(u, v)).norm();
        }
    }
    const double ratio = lu / lv;
    auto nv = static_cast<std::size_t>(std::max(3.0, std::round(std::sqrt(n / ratio))));
    auto nu = static_cast<std::size_t>(std::max(3.0, std::round(static_cast<double>(n) / nv)));
    return {nu, nv};
}

/// Vertices of an nu x nv parameter grid on a torus or cyclide, optionally
/// jittered in parameter space by `jitter` grid cells.  Vertex (i, j) is at
/// index i * nv + j.
inline std::vector<Vec3> parametric_grid(const SurfaceModel& s, std::size_t nu, std::size_t nv,
                                         double jitter = 0.0, std::uint64_t seed = 42) {
    const CounterRng rng(seed);
    std::vector<Vec3> pts;
    pts.reserve(nu * nv);
    const double du = 2 * std::numbers::pi / nu, dv = 2 * std::numbers::pi / nv;
    for (std::size_t i = 0; i < nu; ++i) {
        for (std::size_t j = 0; j < nv; ++j) {
            const std::uint64_t k = 2 * (i * nv + j);
            const double u = (i + jitter * rng.uniform(k, -0.5, 0.5)) * du;
            const double v = (j + jitter * rng.uniform(k + 1, -0.5, 0.5)) * dv;
            pts.push_back(s.project(s.parametrize(u, v)));
        }
    }
    return pts;
}

enum class NodeMethod { Fibonacci, Parametric, FileLoad };

struct NodeOptions {
    std::filesystem::path file;  // FileLoad source
    double jitter = 0.0;         // Parametric: jitter in grid cells
    std::uint64_t seed = 42;
    NodeRole role = NodeRole::TrialCenters;
};

std::vector<Vec3> load_nodes(const std::filesystem::path& path);

/// Node set of (about) n points on `surface`.  Fibonacci is sphere-only and
/// exact in n.  Parametric maps the spiral lattice through the ellipsoid
/// parametrization (exact n) or lays a parameter grid on torus and cyclide
/// (nu * nv close to n).  FileLoad reads `options.file` and projects the points.
inline NodeSet generate_nodes(const SurfaceModel& surface, std::size_t n, NodeMethod method,
                              const NodeOptions& options = {}) {
    NodeSet out;
    out.role = options.role;
    if (method == NodeMethod::FileLoad) {
        for (const auto& p : load_nodes(options.file)) out.points.push_back(surface.project(p));
        if (n != 0 && out.points.size() != n)
            throw EmptyInput("node file " + options.file.string() + " holds " + std::to_string(out.points.size()) +
                             " points, expected " + std::to_string(n));
        if (out.points.size() < 4) throw TooFewPoints("node file holds fewer than 4 points");
        return out;
    }
    if (n < 4) throw TooFewPoints("node generation needs n >= 4");
    if (method == NodeMethod::Fibonacci) {
        if (surface.kind() != SurfaceKind::UnitSphere)
            throw UnsupportedMethod("Fibonacci nodes are only defined on the unit sphere");
        out.points = fibonacci_sphere(n);
        return out;
    }
    switch (surface.kind()) {
        case SurfaceKind::UnitSphere: out.points = fibonacci_sphere(n); break;
        case SurfaceKind::Ellipsoid: {
            const auto& p = surface.params();
            for (const auto& x : fibonacci_sphere(n)) out.points.push_back(Vec3(p[0] * x[0], p[1] * x[1], p[2] * x[2]));
            break;
        }
        case SurfaceKind::Torus:
        case SurfaceKind::DupinCyclide: {
            const auto [nu, nv] = grid_shape(surface, n);
            out.points = parametric_grid(surface, nu, nv, options.jitter, options.seed);
            break;
        }
    }
    return out;
}

/// Reads `x y z` triples, one per line; `#` starts a comment.  Extra columns are ignored.
inline std::vector<Vec3> load_nodes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open node file " + path.string(), 0);
    std::vector<Vec3> pts;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto c = line.find('#'); c != std::string::npos) line.erase(c);
        std::istringstream ss(line);
        Vec3 p;
        if (!(ss >> p[0])) continue;
        if (!(ss >> p[1] >> p[2])) throw ParseError("expected three coordinates", lineno);
        if (!p.allFinite()) throw ParseError("non-finite coordinate", lineno);
        pts.push_back(p);
    }
    return pts;
}

inline void save_nodes(const std::filesystem::path& path, const std::vector<Vec3>& pts,
                       const std::vector<double>* extra_column = nullptr) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(17);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        out << pts[i][0] << ' ' << pts[i][1] << ' ' << pts[i][2];
        if (extra_column) out << ' ' << (*extra_column)[i];
        out << '\n';
    }
}

}  // namespace surfgal
