#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Geometry>

#include "error.hpp"
#include "nodes.hpp"
#include "surface.hpp"

namespace surfgal {

using Triangle = std::array<std::size_t, 3>;

struct TriMesh {
    NodeSet vertices;
    std::vector<Triangle> triangles;

    std::size_t num_vertices() const noexcept { return vertices.points.size(); }

    double triangle_area(std::size_t t) const {
        const auto& p = vertices.points;
        const auto& [a, b, c] = triangles[t];
        return 0.5 * (p[b] - p[a]).cross(p[c] - p[a]).norm();
    }

    double flat_area() const {
        double s = 0;
        for (std::size_t t = 0; t < triangles.size(); ++t) s += triangle_area(t);
        return s;
    }
};

namespace detail {
inline std::uint64_t edge_key(std::size_t a, std::size_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}
}  // namespace detail

/// Checks that the mesh is a closed, consistently oriented 2-manifold with
/// positive triangle areas.  Throws ManifoldViolation otherwise.
inline void validate(const TriMesh& mesh) {
    const std::size_t nv = mesh.num_vertices();
    if (mesh.triangles.empty()) throw ManifoldViolation("mesh has no triangles");
    std::unordered_map<std::uint64_t, int> directed;
    directed.reserve(3 * mesh.triangles.size());
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int e = 0; e < 3; ++e) {
            const std::size_t a = tri[e], b = tri[(e + 1) % 3];
            if (a >= nv || b >= nv) throw ManifoldViolation("triangle " + std::to_string(t) + " references a missing vertex");
            if (a == b) throw ManifoldViolation("triangle " + std::to_string(t) + " repeats a vertex");
            if (++directed[detail::edge_key(a, b)] > 1)
                throw ManifoldViolation("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                        ") used more than twice or with inconsistent orientation");
        }
        if (!(mesh.triangle_area(t) > 0.0)) throw ManifoldViolation("triangle " + std::to_string(t) + " has zero area");
    }
    for (const auto& [key, count] : directed) {
        const std::size_t a = key >> 32, b = key & 0xffffffffu;
        if (!directed.contains(detail::edge_key(b, a)))
            throw ManifoldViolation("edge (" + std::to_string(a) + "," + std::to_string(b) + ") is a boundary edge");
    }
}

/// Flips every triangle if the mesh is inward oriented (signed volume < 0).
inline void orient_outward(TriMesh& mesh) {
    const auto& p = mesh.vertices.points;
    double vol = 0;
    for (const auto& [a, b, c] : mesh.triangles) vol += p[a].dot(p[b].cross(p[c]));
    if (vol < 0)
        for (auto& t : mesh.triangles) std::swap(t[1], t[2]);
}

/// Boundary of the convex hull of `points` (incremental algorithm).  Intended
/// for point sets in convex position such as sphere and ellipsoid nodes; every
/// input point must end up a hull vertex.
inline TriMesh convex_hull(const std::vector<Vec3>& points) {
    const std::size_t n = points.size();
    if (n < 4) throw TooFewPoints("convex hull needs at least 4 points");

    double scale = 0;
    for (const auto& p : points) scale = std::max(scale, p.cwiseAbs().maxCoeff());
    const double tol = 1e-12 * scale;

    // Initial tetrahedron from well-spread points.
    std::size_t i0 = 0, i1 = 0, i2 = 0, i3 = 0;
    double best = -1;
    for (std::size_t i = 1; i < n; ++i)
        if (double d = (points[i] - points[i0]).squaredNorm(); d > best) { best = d; i1 = i; }
    best = -1;
    for (std::size_t i = 0; i < n; ++i)
        if (double d = (points[i] - points[i0]).cross(points[i1] - points[i0]).squaredNorm(); d > best) { best = d; i2 = i; }
    best = -1;
    const Vec3 n012 = (points[i1] - points[i0]).cross(points[i2] - points[i0]);
    for (std::size_t i = 0; i < n; ++i)
        if (double d = std::abs(n012.dot(points[i] - points[i0])); d > best) { best = d; i3 = i; }
    if (best <= tol * n012.norm()) throw ManifoldViolation("points are coplanar");

    struct Face {
        std::size_t v[3];
        Vec3 normal;
        double offset;
        bool alive;
    };
    std::vector<Face> faces;
    std::unordered_map<std::uint64_t, std::size_t> edge_face;  // directed edge -> face
    const Vec3 interior = 0.25 * (points[i0] + points[i1] + points[i2] + points[i3]);

    auto add_face = [&](std::size_t a, std::size_t b, std::size_t c) {
        Vec3 nrm = (points[b] - points[a]).cross(points[c] - points[a]);
        if (nrm.dot(interior - points[a]) > 0) {
            std::swap(b, c);
            nrm = -nrm;
        }
        const std::size_t id = faces.size();
        faces.push_back({{a, b, c}, nrm, nrm.dot(points[a]), true});
        edge_face[detail::edge_key(a, b)] = id;
        edge_face[detail::edge_key(b, c)] = id;
        edge_face[detail::edge_key(c, a)] = id;
    };
    add_face(i0, i1, i2);
    add_face(i0, i1, i3);
    add_face(i0, i2, i3);
    add_face(i1, i2, i3);

    std::vector<std::size_t> active = {0, 1, 2, 3}, visible, next;
    std::vector<std::pair<std::size_t, std::size_t>> horizon;
    for (std::size_t p = 0; p < n; ++p) {
        if (p == i0 || p == i1 || p == i2 || p == i3) continue;
        const Vec3& x = points[p];
        visible.clear();
        next.clear();
        std::size_t closest = active.front();
        double closest_d = -std::numeric_limits<double>::infinity();
        for (std::size_t f : active) {
            const Face& F = faces[f];
            const double d = F.normal.dot(x) - F.offset;
            const double dn = d / F.normal.norm();
            if (dn > tol) visible.push_back(f);
            if (dn > closest_d) { closest_d = dn; closest = f; }
        }
        if (visible.empty()) {
            if (closest_d < -1e-9 * scale) throw ManifoldViolation("point " + std::to_string(p) + " is interior to the hull");
            visible.push_back(closest);  // numerically on the hull
        }
        for (std::size_t f : visible) faces[f].alive = false;
        horizon.clear();
        for (std::size_t f : visible) {
            const auto& v = faces[f].v;
            for (int e = 0; e < 3; ++e) {
                const std::size_t a = v[e], b = v[(e + 1) % 3];
                const auto it = edge_face.find(detail::edge_key(b, a));
                if (it == edge_face.end() || faces[it->second].alive) horizon.emplace_back(a, b);
            }
        }
        for (std::size_t f : visible) {
            const auto& v = faces[f].v;
            for (int e = 0; e < 3; ++e) {
                const auto key = detail::edge_key(v[e], v[(e + 1) % 3]);
                if (auto it = edge_face.find(key); it != edge_face.end() && it->second == f) edge_face.erase(it);
            }
        }
        for (std::size_t f : active)
            if (faces[f].alive) next.push_back(f);
        for (const auto& [a, b] : horizon) {
            const std::size_t id = faces.size();
            const Vec3 nrm = (points[b] - points[a]).cross(x - points[a]);
            faces.push_back({{a, b, p}, nrm, nrm.dot(points[a]), true});
            edge_face[detail::edge_key(a, b)] = id;
            edge_face[detail::edge_key(b, p)] = id;
            edge_face[detail::edge_key(p, a)] = id;
            next.push_back(id);
        }
        active.swap(next);
    }

    TriMesh mesh;
    mesh.vertices.points = points;
    mesh.vertices.role = NodeRole::QuadratureNodes;
    std::vector<bool> used(n, false);
    for (std::size_t f : active) {
        mesh.triangles.push_back({faces[f].v[0], faces[f].v[1], faces[f].v[2]});
        for (auto v : faces[f].v) used[v] = true;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!used[i]) throw ManifoldViolation("point " + std::to_string(i) + " is not a hull vertex");
    validate(mesh);
    return mesh;
}

/// Triangulation of a periodic nu x nv parameter grid (vertex (i,j) at i*nv+j),
/// each cell split along its (i,j)-(i+1,j+1) diagonal.
inline TriMesh periodic_grid_mesh(std::vector<Vec3> points, std::size_t nu, std::size_t nv) {
    if (points.size() != nu * nv) throw LengthMismatch("grid point count does not match nu*nv");
    TriMesh mesh;
    mesh.vertices.points = std::move(points);
    mesh.vertices.role = NodeRole::QuadratureNodes;
    auto id = [&](std::size_t i, std::size_t j) { return (i % nu) * nv + (j % nv); };
    for (std::size_t i = 0; i < nu; ++i) {
        for (std::size_t j = 0; j < nv; ++j) {
            mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    }
    return mesh;
}

/// Regular octahedron on the unit sphere.
inline TriMesh octahedron() {
    TriMesh m;
    m.vertices.points = {Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
    m.triangles = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    return m;
}

/// One 1-to-4 midpoint subdivision with new vertices projected onto `surface`.
inline TriMesh refine(const TriMesh& mesh, const SurfaceModel& surface) {
    TriMesh out;
    out.vertices = mesh.vertices;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> mid;
    auto midpoint = [&](std::size_t a, std::size_t b) {
        const auto key = std::minmax(a, b);
        if (auto it = mid.find(key); it != mid.end()) return it->second;
        const std::size_t id = out.vertices.points.size();
        out.vertices.points.push_back(surface.project(0.5 * (mesh.vertices.points[a] + mesh.vertices.points[b])));
        mid.emplace(key, id);
        return id;
    };
    for (const auto& [a, b, c] : mesh.triangles) {
        const std::size_t ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
        out.triangles.push_back({a, ab, ca});
        out.triangles.push_back({ab, b, bc});
        out.triangles.push_back({ca, bc, c});
        out.triangles.push_back({ab, bc, ca});
    }
    return out;
}

/// Quadrature mesh of about n vertices: spiral lattice plus convex hull on the
/// sphere and ellipsoid, a periodic parameter grid on torus and cyclide.
inline TriMesh make_mesh(const SurfaceModel& surface, std::size_t n, double jitter = 0.0, std::uint64_t seed = 42) {
    TriMesh mesh;
    switch (surface.kind()) {
        case SurfaceKind::UnitSphere:
        case SurfaceKind::Ellipsoid:
            mesh = convex_hull(generate_nodes(surface, n, NodeMethod::Parametric).points);
            break;
        case SurfaceKind::Torus:
        case SurfaceKind::DupinCyclide: {
            const auto [nu, nv] = grid_shape(surface, n);
            mesh = periodic_grid_mesh(parametric_grid(surface, nu, nv, jitter, seed), nu, nv);
            break;
        }
    }
    orient_outward(mesh);
    validate(mesh);
    mesh.vertices.role = NodeRole::QuadratureNodes;
    return mesh;
}

// ---- file formats ----------------------------------------------------------

/// OFF-style text: optional `OFF` line, `NV NT [NE]`, NV lines `x y z`, then NT
/// lines `i j k` (0-based; a leading count `3` is accepted).  `#` starts a comment.
inline TriMesh load_trimesh(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open mesh file " + path.string(), 0);
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&](std::istringstream& ss) {
        while (std::getline(in, line)) {
            ++lineno;
            if (auto c = line.find('#'); c != std::string::npos) line.erase(c);
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            if (line.find_first_not_of(" \t\r") == line.find("OFF")) continue;
            ss = std::istringstream(line);
            return true;
        }
        return false;
    };
    std::istringstream ss;
    if (!next_line(ss)) throw ParseError("missing header", lineno);
    long long nv = -1, nt = -1;
    if (!(ss >> nv >> nt) || nv < 0 || nt < 0) throw ParseError("expected `NV NT` header", lineno);
    TriMesh mesh;
    mesh.vertices.role = NodeRole::QuadratureNodes;
    for (long long i = 0; i < nv; ++i) {
        if (!next_line(ss)) throw ParseError("unexpected end of file in vertex list", lineno);
        Vec3 p;
        if (!(ss >> p[0] >> p[1] >> p[2]) || !p.allFinite()) throw ParseError("bad vertex line", lineno);
        mesh.vertices.points.push_back(p);
    }
    for (long long t = 0; t < nt; ++t) {
        if (!next_line(ss)) throw ParseError("unexpected end of file in triangle list", lineno);
        std::vector<long long> v;
        long long x;
        while (ss >> x) v.push_back(x);
        if (!ss.eof()) throw ParseError("non-integer triangle index", lineno);
        if (v.size() == 4 && v[0] == 3) v.erase(v.begin());
        if (v.size() != 3) throw ParseError("triangle line needs three indices", lineno);
        for (auto k : v)
            if (k < 0 || k >= nv) throw ParseError("vertex index out of range", lineno);
        mesh.triangles.push_back({static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1]),
                                  static_cast<std::size_t>(v[2])});
    }
    validate(mesh);
    return mesh;
}

inline void save_trimesh(const std::filesystem::path& path, const TriMesh& mesh) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write " + path.string());
    std::fprintf(f, "OFF\n%zu %zu 0\n", mesh.num_vertices(), mesh.triangles.size());
    for (const auto& p : mesh.vertices.points) std::fprintf(f, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
    for (const auto& [a, b, c] : mesh.triangles) std::fprintf(f, "%zu %zu %zu\n", a, b, c);
    std::fclose(f);
}

/// VTK legacy ASCII POLYDATA with a point scalar `u`.
inline void save_field(const std::filesystem::path& path, const TriMesh& mesh, const std::vector<double>& values) {
    if (values.size() != mesh.num_vertices()) throw LengthMismatch("field length differs from vertex count");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw Error("cannot write " + path.string());
    std::fprintf(f, "# vtk DataFile Version 3.0\nsurfgal field\nASCII\nDATASET POLYDATA\n");
    std::fprintf(f, "POINTS %zu double\n", mesh.num_vertices());
    for (const auto& p : mesh.vertices.points) std::fprintf(f, "%.17g %.17g %.17g\n", p[0], p[1], p[2]);
    std::fprintf(f, "POLYGONS %zu %zu\n", mesh.triangles.size(), 4 * mesh.triangles.size());
    for (const auto& [a, b, c] : mesh.triangles) std::fprintf(f, "3 %zu %zu %zu\n", a, b, c);
    std::fprintf(f, "POINT_DATA %zu\nSCALARS u double 1\nLOOKUP_TABLE default\n", values.size());
    for (double v : values) std::fprintf(f, "%.17g\n", v);
    std::fclose(f);
}

struct VtkField {
    TriMesh mesh;
    std::vector<double> values;
};

/// Reader for the files written by save_field.
inline VtkField load_field(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string(), 0);
    VtkField out;
    std::string line, word;
    std::size_t lineno = 0;
    auto expect = [&](const std::string& prefix) {
        while (std::getline(in, line)) {
            ++lineno;
            if (line.rfind(prefix, 0) == 0) return;
        }
        throw ParseError("missing " + prefix + " section", lineno);
    };
    auto read = [&](auto& x) {
        if (!(in >> x)) throw ParseError("truncated data", lineno);
    };
    expect("# vtk DataFile");
    expect("DATASET POLYDATA");
    expect("POINTS");
    std::size_t n = std::stoul(line.substr(7));
    out.mesh.vertices.points.resize(n);
    for (auto& p : out.mesh.vertices.points) read(p[0]), read(p[1]), read(p[2]);
    expect("POLYGONS");
    std::istringstream hs(line.substr(9));
    std::size_t nt = 0;
    hs >> nt;
    for (std::size_t t = 0; t < nt; ++t) {
        std::size_t k;
        Triangle tri;
        read(k);
        if (k != 3) throw ParseError("only triangles are supported", lineno);
        read(tri[0]), read(tri[1]), read(tri[2]);
        out.mesh.triangles.push_back(tri);
    }
    expect("POINT_DATA");
    expect("SCALARS u");
    expect("LOOKUP_TABLE");
    out.values.resize(n);
    for (auto& v : out.values) read(v);
    validate(out.mesh);
    return out;
}

}  // namespace surfgal
