#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "kdtree.hpp"
#include "mesh.hpp"
#include "surface.hpp"

namespace surfgal {

enum class QuadratureSource { Computed, Loaded };

struct QuadratureRule {
    NodeSet nodes;
    std::vector<double> weights;
    int order = 0;  // polynomial degree of the construction (0 for loaded weights)
    QuadratureSource source = QuadratureSource::Computed;

    std::size_t size() const noexcept { return weights.size(); }
    double total() const {
        double s = 0;
        for (double w : weights) s += w;
        return s;
    }
    /// Σ|ω| / Σω > 1.5.
    bool negative_weight_flag() const {
        double a = 0;
        for (double w : weights) a += std::abs(w);
        return a > 1.5 * total();
    }
};

inline double integrate(const QuadratureRule& rule, const std::vector<double>& f) {
    if (f.size() != rule.size())
        throw LengthMismatch(std::to_string(f.size()) + " samples for a rule of " + std::to_string(rule.size()) + " nodes");
    double s = 0;
    for (std::size_t i = 0; i < f.size(); ++i) s += rule.weights[i] * f[i];
    return s;
}

inline double integrate(const QuadratureRule& rule, const Eigen::VectorXd& f) {
    if (static_cast<std::size_t>(f.size()) != rule.size())
        throw LengthMismatch(std::to_string(f.size()) + " samples for a rule of " + std::to_string(rule.size()) + " nodes");
    return Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), f.size()).dot(f);
}

/// Rule restricted to a subset of its nodes; integrates f(support[i]) values.
struct LocalRule {
    std::vector<std::size_t> support;
    std::vector<double> weights;

    double integrate(const std::vector<double>& f_on_support) const {
        if (f_on_support.size() != support.size()) throw LengthMismatch("local rule sample count");
        double s = 0;
        for (std::size_t i = 0; i < support.size(); ++i) s += weights[i] * f_on_support[i];
        return s;
    }
};

inline LocalRule local_rule(const QuadratureRule& rule, std::vector<std::size_t> support) {
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    LocalRule out;
    for (std::size_t i : support) {
        if (i >= rule.size()) throw LengthMismatch("support index outside the rule");
        out.weights.push_back(rule.weights[i]);
    }
    out.support = std::move(support);
    return out;
}

namespace detail {

/// Gauss-Legendre nodes and weights on [0, 1].
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre01(int n) {
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5)), dp = 0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1, p1 = z;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2 * k - 1) * z * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1, p1 = z;
            dp = n * (z * p1 - p0) / (z * z - 1);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        x[i] = 0.5 * (1 - z);
        w[i] = 1.0 / ((1 - z * z) * dp * dp);
    }
    return {x, w};
}

/// ∫ over the triangle (p, a, b), signed by orientation, of |x - p|^3.
inline double fan_r3(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const Eigen::Vector2d e = b - a;
    const double len = e.norm();
    if (len == 0) return 0;
    const Eigen::Vector2d u = e / len;
    const Eigen::Vector2d pa = a - p;
    const double h = (pa[0] * u[1] - pa[1] * u[0]);  // signed distance from p to the edge line
    const double ah = std::abs(h);
    if (ah < 1e-300) return 0;
    const double sa = pa.dot(u), sb = sa + len;
    // Antiderivative of rho^5 / 5 with rho = |h| sec(phi), written in arclength s.
    auto F = [&](double s) {
        const double rho = std::hypot(s, ah);
        return (rho * rho * rho * s * ah / 4 + 0.375 * ah * ah * ah * rho * s + 0.375 * std::pow(ah, 5) * std::asinh(s / ah)) / 5;
    };
    return (h > 0 ? 1.0 : -1.0) * (F(sb) - F(sa));
}

inline double triangle_r3(const std::array<Eigen::Vector2d, 3>& t, const Eigen::Vector2d& p) {
    const Eigen::Vector2d d1 = t[1] - t[0], d2 = t[2] - t[0];
    const double orient = d1[0] * d2[1] - d1[1] * d2[0] > 0 ? 1.0 : -1.0;
    return orient * (fan_r3(p, t[0], t[1]) + fan_r3(p, t[1], t[2]) + fan_r3(p, t[2], t[0]));
}

inline std::vector<std::pair<int, int>> monomials(int degree) {
    std::vector<std::pair<int, int>> out;
    for (int d = 0; d <= degree; ++d)
        for (int a = d; a >= 0; --a) out.emplace_back(a, d - a);
    return out;
}

inline double cube(double x) { return x * x * x; }

inline double ipow(double x, int k) {
    double r = 1;
    while (k-- > 0) r *= x;
    return r;
}

/// Blended-normal chart of one mesh triangle: phi(l1, l2) = p(l) + tau(l) d(l), with p
/// and d the barycentric blends of the vertices and their unit normals and tau the
/// root of F(p + tau d) nearest 0.  Neighbouring triangles share the chart on their
/// common edge, so the charts tile the surface.
struct TriangleChart {
    const SurfaceModel* s;
    Vec3 v0, e1, e2, n0, m1, m2;

    Vec3 base(double l1, double l2) const { return v0 + l1 * e1 + l2 * e2; }
    Vec3 dir(double l1, double l2) const { return n0 + l1 * m1 + l2 * m2; }

    /// Preimage (l1, l2, tau) of a surface point y; false if Newton fails.
    bool invert(const Vec3& y, Eigen::Vector3d& u) const {
        Eigen::Matrix3d jac;
        jac.col(0) = e1;
        jac.col(1) = e2;
        jac.col(2) = n0;
        u = jac.colPivHouseholderQr().solve(y - v0);
        const double scale = std::max(e1.norm(), e2.norm());
        for (int it = 0; it < 50; ++it) {
            const Vec3 r = base(u[0], u[1]) + u[2] * dir(u[0], u[1]) - y;
            if (r.norm() <= 1e-15 * (1 + y.norm())) return true;
            jac.col(0) = e1 + u[2] * m1;
            jac.col(1) = e2 + u[2] * m2;
            jac.col(2) = dir(u[0], u[1]);
            const Eigen::Vector3d du = jac.partialPivLu().solve(r);
            u -= du;
            if (!u.allFinite() || std::abs(u[2]) > 10 * scale) return false;
            if (du.norm() < 1e-15) return true;
        }
        return (base(u[0], u[1]) + u[2] * dir(u[0], u[1]) - y).norm() <= 1e-12 * (1 + y.norm());
    }

    double tau(double l1, double l2) const {
        const Vec3 p = base(l1, l2), d = dir(l1, l2);
        double t = 0;
        for (int it = 0; it < 50; ++it) {
            const Vec3 x = p + t * d;
            const double dt = s->level(x) / s->gradient(x).dot(d);
            t -= dt;
            if (std::abs(dt) < 1e-16 * (1 + std::abs(t))) break;
        }
        return t;
    }

    /// |phi_1 x phi_2| at a preimage (l1, l2, tau).
    double area_element(const Eigen::Vector3d& u) const {
        const Vec3 d = dir(u[0], u[1]);
        const Vec3 x = base(u[0], u[1]) + u[2] * d;
        const Vec3 g = s->gradient(x);
        const double gd = g.dot(d);
        const Vec3 a1 = e1 + u[2] * m1, a2 = e2 + u[2] * m2;
        const Vec3 p1 = a1 - (g.dot(a1) / gd) * d;
        const Vec3 p2 = a2 - (g.dot(a2) / gd) * d;
        return p1.cross(p2).norm();
    }
};

}  // namespace detail

struct QuadratureOptions {
    int degree = 8;
    std::size_t stencil = 0;  // 0: max(3 * dim(P_{degree/2}), 17)
    int poly_degree = -1;     // -1: degree / 2
};

inline std::size_t default_quadrature_stencil(int degree) {
    const std::size_t p = static_cast<std::size_t>(degree / 2);
    return std::max<std::size_t>(3 * (p + 1) * (p + 2) / 2, 17);
}

/// Surface quadrature on the mesh vertices.  Each triangle is pulled back to its
/// flat triangle through the blended-normal chart.  There, f is interpolated on the
/// k nearest vertices by PHS r^3 plus polynomials up to degree/2 in planar
/// coordinates.  The weights integrate every cardinal function against the chart's
/// area ratio J over the flat triangle.  The r^3 moments use the closed form times
/// J(q_i) plus a Gauss correction for J - J(q_i).
inline QuadratureRule compute_weights(const TriMesh& mesh, const SurfaceModel& surface, const QuadratureOptions& opt = {}) {
    if (opt.degree != 2 && opt.degree != 4 && opt.degree != 6 && opt.degree != 8)
        throw UnsupportedMethod("quadrature degree must be 2, 4, 6 or 8");
    const auto& y = mesh.vertices.points;
    const std::size_t ny = y.size();
    const int pdeg = opt.poly_degree >= 0 ? opt.poly_degree : opt.degree / 2;
    const auto mono = detail::monomials(pdeg);
    const auto nm = static_cast<Eigen::Index>(mono.size());
    const std::size_t k = std::min(opt.stencil ? opt.stencil : default_quadrature_stencil(2 * pdeg), ny);
    if (k < mono.size() + 1) throw TooFewPoints("quadrature stencil smaller than the polynomial space");

    std::vector<Vec3> normals(ny);
    for (std::size_t i = 0; i < ny; ++i) normals[i] = surface.normal(y[i]);

    const auto [gx, gw] = detail::gauss_legendre01(pdeg + 5);
    const KdTree tree(y);
    QuadratureRule rule;
    rule.nodes = mesh.vertices;
    rule.nodes.role = NodeRole::QuadratureNodes;
    rule.weights.assign(ny, 0.0);
    rule.order = opt.degree;
    rule.source = QuadratureSource::Computed;

    std::vector<std::size_t> idx;
    std::vector<Eigen::Vector2d> q, gp;
    std::vector<double> jac, gj, gwt;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        const auto& tri = mesh.triangles[t];
        detail::TriangleChart chart{&surface,
                                    y[tri[0]],
                                    y[tri[1]] - y[tri[0]],
                                    y[tri[2]] - y[tri[0]],
                                    normals[tri[0]],
                                    normals[tri[1]] - normals[tri[0]],
                                    normals[tri[2]] - normals[tri[0]]};
        const Vec3 cross = chart.e1.cross(chart.e2);
        const double area = 0.5 * cross.norm();
        if (area < 1e-14) throw FoldedProjection("triangle " + std::to_string(t) + " has degenerate planar area");
        const Vec3 centroid = (y[tri[0]] + y[tri[1]] + y[tri[2]]) / 3.0;
        const double len = std::max({chart.e1.norm(), chart.e2.norm(), (y[tri[2]] - y[tri[1]]).norm()});
        const Vec3 a1 = chart.e1.normalized();
        const Vec3 a2 = cross.cross(chart.e1).normalized();
        auto plane = [&](const Vec3& p) { return Eigen::Vector2d((p - centroid).dot(a1) / len, (p - centroid).dot(a2) / len); };

        // Stencil: the triangle's vertices first, then nearest vertices to the centroid.
        idx.assign(tri.begin(), tri.end());
        for (const auto& nb : tree.knn(centroid, k + 3)) {
            if (idx.size() >= k) break;
            if (std::find(tri.begin(), tri.end(), nb.index) == tri.end()) idx.push_back(nb.index);
        }
        q.clear();
        jac.clear();
        std::vector<std::size_t> used;
        for (std::size_t j = 0; j < idx.size(); ++j) {
            Eigen::Vector3d u;
            if (j < 3) {
                u = Eigen::Vector3d(j == 1, j == 2, 0.0);
            } else if (!chart.invert(y[idx[j]], u) || normals[idx[j]].dot(chart.dir(u[0], u[1])) <= 0) {
                continue;  // the chart does not reach this node
            }
            used.push_back(idx[j]);
            q.push_back(plane(chart.base(u[0], u[1])));
            jac.push_back(chart.area_element(u) / (2 * area));
        }
        const auto n = static_cast<Eigen::Index>(used.size());
        if (static_cast<std::size_t>(n) < mono.size() + 1) throw SingularLocalSystem(t);

        const std::array<Eigen::Vector2d, 3> ptri = {plane(y[tri[0]]), plane(y[tri[1]]), plane(y[tri[2]])};
        const double parea = area / (len * len);

        // Collapsed Gauss points on the flat triangle with the chart's area ratio.
        gp.clear();
        gj.clear();
        gwt.clear();
        for (std::size_t a = 0; a < gx.size(); ++a) {
            for (std::size_t b = 0; b < gx.size(); ++b) {
                const double l1 = gx[a], l2 = gx[b] * (1 - gx[a]);
                gp.push_back(plane(chart.base(l1, l2)));
                gj.push_back(chart.area_element(Eigen::Vector3d(l1, l2, chart.tau(l1, l2))) / (2 * area));
                gwt.push_back(gw[a] * gw[b] * (1 - gx[a]) * 2 * parea);
            }
        }

        Eigen::MatrixXd sys = Eigen::MatrixXd::Zero(n + nm, n + nm);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + nm);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < i; ++j) sys(i, j) = sys(j, i) = detail::cube((q[i] - q[j]).norm());
            for (Eigen::Index c = 0; c < nm; ++c)
                sys(i, n + c) = sys(n + c, i) = detail::ipow(q[i][0], mono[c].first) * detail::ipow(q[i][1], mono[c].second);
            // ∫ r^3 J = J(q_i) ∫ r^3 (closed form) + ∫ r^3 (J - J(q_i)) (Gauss; smooth remainder)
            double rem = 0;
            for (std::size_t g = 0; g < gp.size(); ++g) rem += gwt[g] * detail::cube((gp[g] - q[i]).norm()) * (gj[g] - jac[i]);
            rhs[i] = jac[i] * detail::triangle_r3(ptri, q[i]) + rem;
        }
        for (std::size_t g = 0; g < gp.size(); ++g)
            for (Eigen::Index c = 0; c < nm; ++c)
                rhs[n + c] += gwt[g] * gj[g] * detail::ipow(gp[g][0], mono[c].first) * detail::ipow(gp[g][1], mono[c].second);

        Eigen::PartialPivLU<Eigen::MatrixXd> lu(sys);
        if (!(lu.rcond() > 1e-15)) throw SingularLocalSystem(t);
        const Eigen::VectorXd w = lu.solve(rhs);
        if (!w.allFinite()) throw SingularLocalSystem(t);
        for (Eigen::Index i = 0; i < n; ++i) rule.weights[used[i]] += len * len * w[i];
    }
    return rule;
}

// ---- weight files -------------------------------------------------------------

inline void save_weights(const std::filesystem::path& path, const QuadratureRule& rule) {
    save_nodes(path, rule.nodes.points, &rule.weights);
}

/// Reads `x y z w` lines (Loaded rule); `#` starts a comment.
inline QuadratureRule load_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open weight file " + path.string(), 0);
    QuadratureRule rule;
    rule.source = QuadratureSource::Loaded;
    rule.nodes.role = NodeRole::QuadratureNodes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto c = line.find('#'); c != std::string::npos) line.erase(c);
        std::istringstream ss(line);
        Vec3 p;
        double w;
        if (!(ss >> p[0])) continue;
        if (!(ss >> p[1] >> p[2] >> w)) throw ParseError("expected `x y z w`", lineno);
        if (!p.allFinite() || !std::isfinite(w)) throw ParseError("non-finite value", lineno);
        rule.nodes.points.push_back(p);
        rule.weights.push_back(w);
    }
    if (rule.weights.empty()) throw EmptyInput("weight file holds no nodes");
    return rule;
}

}  // namespace surfgal
