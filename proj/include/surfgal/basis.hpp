#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCore>

#include "error.hpp"
#include "kdtree.hpp"
#include "kernel.hpp"
#include "nodes.hpp"

namespace surfgal {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Stencil {
    std::size_t center = 0;
    std::vector<std::size_t> neighbors;  // center first, then by (distance, index)
    double radius = 0;                   // largest chordal distance to the center
};

/// n = K2 * ceil(log10(N)^2).
inline std::size_t stencil_size(std::size_t n_centers, std::size_t k2) {
    const double l = std::log10(static_cast<double>(n_centers));
    return k2 * static_cast<std::size_t>(std::ceil(l * l - 1e-12));
}

inline std::vector<Stencil> build_stencils(const NodeSet& x, std::size_t k2) {
    if (k2 < 1) throw ConfigError("K2 must be at least 1");
    const std::size_t n = stencil_size(x.size(), k2);
    if (x.size() < n || n == 0)
        throw TooFewPoints("stencil of " + std::to_string(n) + " points requested from " + std::to_string(x.size()) + " centers");
    const KdTree tree(x.points);
    std::vector<Stencil> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto nb = tree.knn(x.points[i], n);
        auto& s = out[i];
        s.center = i;
        s.neighbors.push_back(i);
        for (const auto& e : nb) {
            if (e.index != i) s.neighbors.push_back(e.index);
            s.radius = std::max(s.radius, std::sqrt(e.dist2));
        }
        s.neighbors.resize(n);  // drops the farthest point if i was tied out of its own list
    }
    return out;
}

enum class BasisMode { Full, Local };

struct LagrangeBasis {
    NodeSet centers;
    KernelSpec kernel;
    BasisMode mode = BasisMode::Local;
    std::size_t k2 = 0;  // Local mode only
    std::vector<Stencil> stencils;
    SparseRowMatrix coeffs;     // row xi: coefficients of chi_xi over translates psi(., eta)
    std::size_t jittered = 0;   // local systems that needed the diagonal shift

    std::size_t size() const noexcept { return centers.size(); }
};

namespace detail {
inline Eigen::MatrixXd gram(const KernelSpec& k, const std::vector<Vec3>& pts, const std::vector<std::size_t>& idx) {
    const auto n = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        g(i, i) = 1.0;
        for (Eigen::Index j = 0; j < i; ++j) g(i, j) = g(j, i) = psi(k, (pts[idx[i]] - pts[idx[j]]).norm());
    }
    return g;
}

inline double cond_estimate(const Eigen::MatrixXd& g) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return ev.minCoeff() > 0 ? ev.maxCoeff() / ev.minCoeff() : std::numeric_limits<double>::infinity();
}

/// Cholesky factor of g with one +1e-12 relative diagonal shift on failure.
inline Eigen::LLT<Eigen::MatrixXd> factor_gram(Eigen::MatrixXd g, std::size_t center, std::size_t& jittered) {
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() == Eigen::Success) return llt;
    const double shift = 1e-12 * g.diagonal().mean();
    Eigen::MatrixXd gj = g;
    gj.diagonal().array() += shift;
    llt.compute(gj);
    if (llt.info() != Eigen::Success) throw IllConditioned(center, cond_estimate(g));
    ++jittered;
    return llt;
}

inline void prune_row(std::vector<Eigen::Triplet<double>>& trip, std::size_t row, const Eigen::VectorXd& a,
                      const std::vector<std::size_t>& cols) {
    const double cut = 1e-14 * a.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < a.size(); ++j)
        if (std::abs(a[j]) >= cut) trip.emplace_back(row, cols[j], a[j]);
}
}  // namespace detail

/// Local Lagrange functions: chi_xi interpolates the cardinal data e_xi on the
/// n nearest centers of xi.
inline LagrangeBasis build_local_basis(const NodeSet& x, const KernelSpec& kernel, std::size_t k2) {
    LagrangeBasis b;
    b.centers = x;
    b.kernel = kernel;
    b.mode = BasisMode::Local;
    b.k2 = k2;
    b.stencils = build_stencils(x, k2);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(x.size() * b.stencils.front().neighbors.size());
    for (const auto& s : b.stencils) {
        const auto llt = detail::factor_gram(detail::gram(kernel, x.points, s.neighbors), s.center, b.jittered);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.neighbors.size()));
        rhs[0] = 1.0;
        detail::prune_row(trip, s.center, llt.solve(rhs), s.neighbors);
    }
    b.coeffs.resize(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(x.size()));
    b.coeffs.setFromTriplets(trip.begin(), trip.end());
    return b;
}

/// Global Lagrange functions: coeffs = inverse Gram matrix.
inline LagrangeBasis build_full_basis(const NodeSet& x, const KernelSpec& kernel, std::size_t cap = 4000) {
    if (x.size() > cap)
        throw CapExceeded("full basis on " + std::to_string(x.size()) + " centers exceeds the cap of " + std::to_string(cap));
    if (x.size() == 0) throw EmptyInput("no centers");
    LagrangeBasis b;
    b.centers = x;
    b.kernel = kernel;
    b.mode = BasisMode::Full;
    std::vector<std::size_t> all(x.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto llt = detail::factor_gram(detail::gram(kernel, x.points, all), 0, b.jittered);
    const auto n = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
    inv = 0.5 * (inv + inv.transpose()).eval();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(x.size() * x.size());
    for (Eigen::Index i = 0; i < n; ++i) detail::prune_row(trip, i, inv.row(i).transpose(), all);
    b.coeffs.resize(n, n);
    b.coeffs.setFromTriplets(trip.begin(), trip.end());
    b.stencils.resize(x.size());
    double diam = 0;
    for (const auto& p : x.points) diam = std::max(diam, (p - x.points[0]).norm());
    for (std::size_t i = 0; i < x.size(); ++i) {
        b.stencils[i].center = i;
        b.stencils[i].neighbors = all;
        std::swap(b.stencils[i].neighbors[0], b.stencils[i].neighbors[i]);
        b.stencils[i].radius = 2 * diam;
    }
    return b;
}

inline double eval_basis(const LagrangeBasis& b, std::size_t xi, const Vec3& z) {
    double s = 0;
    for (SparseRowMatrix::InnerIterator it(b.coeffs, static_cast<Eigen::Index>(xi)); it; ++it)
        s += it.value() * psi(b.kernel, (z - b.centers.points[it.col()]).norm());
    return s;
}

inline Vec3 eval_basis_grad(const LagrangeBasis& b, const SurfaceModel& surface, std::size_t xi, const Vec3& z) {
    Vec3 g = Vec3::Zero();
    for (SparseRowMatrix::InnerIterator it(b.coeffs, static_cast<Eigen::Index>(xi)); it; ++it)
        g += it.value() * grad_psi_ambient(b.kernel, z, b.centers.points[it.col()]);
    const Vec3 n = surface.normal(z);
    return g - n.dot(g) * n;
}

/// Dense table T(i, xi) = chi_xi(z_i).
inline Eigen::MatrixXd eval_basis_table(const LagrangeBasis& b, const std::vector<Vec3>& z) {
    const auto nz = static_cast<Eigen::Index>(z.size()), nx = static_cast<Eigen::Index>(b.size());
    Eigen::MatrixXd k(nz, nx);
    for (Eigen::Index j = 0; j < nx; ++j)
        for (Eigen::Index i = 0; i < nz; ++i) k(i, j) = psi(b.kernel, (z[i] - b.centers.points[j]).norm());
    return k * b.coeffs.transpose();
}

/// Interpolant sum_xi c_xi chi_xi at the points z.
inline Eigen::VectorXd evaluate(const LagrangeBasis& b, const Eigen::VectorXd& c, const std::vector<Vec3>& z) {
    const Eigen::VectorXd w = b.coeffs.transpose() * c;  // weights on the kernel translates
    Eigen::VectorXd out(static_cast<Eigen::Index>(z.size()));
    for (std::size_t i = 0; i < z.size(); ++i) {
        double s = 0;
        for (Eigen::Index j = 0; j < w.size(); ++j) s += w[j] * psi(b.kernel, (z[i] - b.centers.points[j]).norm());
        out[static_cast<Eigen::Index>(i)] = s;
    }
    return out;
}

/// Largest |chi_xi(eta) - delta| over every stencil pair.
inline double cardinality_residual(const LagrangeBasis& b) {
    double r = 0;
    for (const auto& s : b.stencils)
        for (std::size_t eta : s.neighbors)
            r = std::max(r, std::abs(eval_basis(b, s.center, b.centers.points[eta]) - (eta == s.center ? 1.0 : 0.0)));
    return r;
}

// ---- binary cache -----------------------------------------------------------
// Layout (little-endian): "SGLB", u64 key, u64 rows, u64 nnz, u64 row_ptr[rows+1],
// u64 col[nnz], f64 val[nnz].

inline std::uint64_t basis_cache_key(const SurfaceModel& s, std::size_t n, const KernelSpec& k, std::size_t k2) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](const void* p, std::size_t len) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < len; ++i) h = (h ^ c[i]) * 1099511628211ull;
    };
    const int kind = static_cast<int>(s.kind());
    mix(&kind, sizeof kind);
    mix(s.params().data(), sizeof(double) * 4);
    mix(&n, sizeof n);
    mix(&k.m, sizeof k.m);
    mix(&k.epsilon, sizeof k.epsilon);
    mix(&k2, sizeof k2);
    return h;
}

inline void save_coeffs(const std::filesystem::path& path, const SparseRowMatrix& c, std::uint64_t key) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    auto put = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    SparseRowMatrix m = c;
    m.makeCompressed();
    out.write("SGLB", 4);
    put(key);
    put(static_cast<std::uint64_t>(m.rows()));
    put(static_cast<std::uint64_t>(m.nonZeros()));
    for (Eigen::Index i = 0; i <= m.rows(); ++i) put(static_cast<std::uint64_t>(m.outerIndexPtr()[i]));
    for (Eigen::Index i = 0; i < m.nonZeros(); ++i) put(static_cast<std::uint64_t>(m.innerIndexPtr()[i]));
    out.write(reinterpret_cast<const char*>(m.valuePtr()), static_cast<std::streamsize>(8 * m.nonZeros()));
}

/// Returns false if the file is missing or was written for another key.
inline bool load_coeffs(const std::filesystem::path& path, std::uint64_t key, SparseRowMatrix& c) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    char magic[4];
    in.read(magic, 4);
    auto get = [&] {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    if (std::memcmp(magic, "SGLB", 4) != 0 || get() != key) return false;
    const auto rows = static_cast<Eigen::Index>(get()), nnz = static_cast<Eigen::Index>(get());
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<std::uint64_t> ptr(rows + 1), col(nnz);
    for (auto& p : ptr) p = get();
    for (auto& p : col) p = get();
    std::vector<double> val(nnz);
    in.read(reinterpret_cast<char*>(val.data()), static_cast<std::streamsize>(8 * nnz));
    if (!in) throw ParseError("truncated basis cache " + path.string(), 0);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (auto k = ptr[i]; k < ptr[i + 1]; ++k) trip.emplace_back(i, col[k], val[k]);
    c.resize(rows, rows);
    c.setFromTriplets(trip.begin(), trip.end());
    return true;
}

}  // namespace surfgal
