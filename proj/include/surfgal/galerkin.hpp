#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <unsupported/Eigen/SparseExtra>

#include "basis.hpp"
#include "error.hpp"
#include "quadrature.hpp"
#include "surface.hpp"

namespace surfgal {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class Potential { GinzburgLandau, Quadratic, Zero };

/// E[u] = int c_grad/2 |grad u|^2 + c_react G(u).
struct EnergySpec {
    double c_grad = 1.0;
    double c_react = 1.0;
    Potential potential = Potential::GinzburgLandau;

    EnergySpec() = default;
    EnergySpec(double grad, double react, Potential g = Potential::GinzburgLandau)
        : c_grad(grad), c_react(react), potential(g) {
        if (!(grad > 0)) throw ConfigError("c_grad must be positive");
        if (!(react >= 0)) throw ConfigError("c_react must be nonnegative");
    }

    /// eps^2/2 |grad u|^2 + G(u)
    static EnergySpec interface_width(double eps) { return {eps * eps, 1.0}; }
    /// 1/2 |grad u|^2 + G(u)/eps^2
    static EnergySpec scaled(double eps) { return {1.0, 1.0 / (eps * eps)}; }

    double G(double u) const noexcept {
        switch (potential) {
            case Potential::GinzburgLandau: return 0.25 * (u * u - 1) * (u * u - 1);
            case Potential::Quadratic: return 0.5 * u * u;
            case Potential::Zero: break;
        }
        return 0.0;
    }
    double dG(double u) const noexcept {
        switch (potential) {
            case Potential::GinzburgLandau: return u * u * u - u;
            case Potential::Quadratic: return u;
            case Potential::Zero: break;
        }
        return 0.0;
    }
    /// (G(b) - G(a)) / (b - a), closed form, valid at a == b.
    double dq(double a, double b) const noexcept {
        switch (potential) {
            case Potential::GinzburgLandau: return 0.25 * (a + b) * (a * a + b * b - 2);
            case Potential::Quadratic: return 0.5 * (a + b);
            case Potential::Zero: break;
        }
        return 0.0;
    }
};

/// Basis values (or one gradient component) at the quadrature nodes, N_Y x N_X.
/// Stored dense when most entries are inside the numeric supports.
struct EvalTable {
    bool is_dense = true;
    Eigen::MatrixXd dense;
    SparseRowMatrix sparse;

    Eigen::Index rows() const { return is_dense ? dense.rows() : sparse.rows(); }
    Eigen::Index cols() const { return is_dense ? dense.cols() : sparse.cols(); }
    Eigen::VectorXd apply(const Eigen::VectorXd& a) const {
        if (is_dense) return dense * a;
        return sparse * a;
    }
    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& v) const {
        if (is_dense) return dense.transpose() * v;
        return sparse.transpose() * v;
    }
    double operator()(Eigen::Index i, Eigen::Index j) const { return is_dense ? dense(i, j) : sparse.coeff(i, j); }
};

struct GalerkinOperators {
    SparseMatrix A;  // [Q_Y(chi_xi chi_eta)]
    SparseMatrix B;  // [Q_Y(grad chi_xi . grad chi_eta)]
    EvalTable eval;  // chi_xi(zeta)
    std::array<EvalTable, 3> grad;  // tangential gradient components; empty unless requested
    QuadratureRule rule;
    Eigen::VectorXd weights;

    std::size_t size() const { return static_cast<std::size_t>(A.rows()); }
    Eigen::VectorXd values_at_nodes(const Eigen::VectorXd& alpha) const { return eval.apply(alpha); }
};

struct AssemblyOptions {
    std::size_t chunk = 256;
    double dense_fill = 0.25;  // store tables dense above this support fill
    bool keep_gradients = false;
};

namespace detail {

inline double support_radius(const LagrangeBasis& b, std::size_t xi) {
    return b.stencils[xi].radius + 60.0 / b.kernel.epsilon;
}

inline void check_on_surface(const std::vector<Vec3>& pts, const SurfaceModel& s, const char* what) {
    for (const auto& p : pts)
        if ((s.project(p) - p).norm() > 1e-6 * (1 + p.norm()))
            throw SupportMismatch(std::string(what) + " do not lie on the " + s.name());
}

inline SparseMatrix symmetric_sparse(const Eigen::MatrixXd& m, const LagrangeBasis& b) {
    const auto n = m.rows();
    std::vector<Eigen::Triplet<double>> trip;
    const double reach = 120.0 / b.kernel.epsilon;
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            if (v == 0.0) continue;
            const double d = (b.centers.points[i] - b.centers.points[j]).norm();
            if (d <= b.stencils[i].radius + b.stencils[j].radius + reach) trip.emplace_back(i, j, v);
        }
    SparseMatrix out(n, n);
    out.setFromTriplets(trip.begin(), trip.end());
    return out;
}

}  // namespace detail

/// Mass and stiffness matrices by quadrature on the rule's nodes.
inline GalerkinOperators assemble(const LagrangeBasis& basis, const QuadratureRule& rule, const SurfaceModel& surface,
                                  const AssemblyOptions& opt = {}) {
    detail::check_on_surface(rule.nodes.points, surface, "quadrature nodes");
    detail::check_on_surface(basis.centers.points, surface, "basis centers");
    const auto nx = static_cast<Eigen::Index>(basis.size());
    const auto ny = static_cast<Eigen::Index>(rule.size());
    const auto& y = rule.nodes.points;
    const auto& x = basis.centers.points;

    std::vector<double> reach(basis.size());
    for (std::size_t j = 0; j < basis.size(); ++j) reach[j] = detail::support_radius(basis, j);
    std::size_t inside = 0;
    for (const auto& p : y)
        for (std::size_t j = 0; j < x.size(); ++j) inside += (p - x[j]).norm() <= reach[j];
    const bool dense = static_cast<double>(inside) >= opt.dense_fill * static_cast<double>(nx) * static_cast<double>(ny);

    // C^T with row xi of C holding the coefficients of chi_xi
    const SparseMatrix ct = SparseMatrix(basis.coeffs.transpose());
    const bool dense_coeffs = static_cast<double>(ct.nonZeros()) > 0.2 * static_cast<double>(nx) * static_cast<double>(nx);
    const Eigen::MatrixXd ct_dense = dense_coeffs ? Eigen::MatrixXd(ct) : Eigen::MatrixXd();
    auto times_ct = [&](const Eigen::MatrixXd& k) -> Eigen::MatrixXd {
        if (dense_coeffs) return k * ct_dense;
        return k * ct;
    };

    GalerkinOperators ops;
    ops.rule = rule;
    ops.weights = Eigen::Map<const Eigen::VectorXd>(rule.weights.data(), ny);
    ops.eval.is_dense = dense;
    if (dense) ops.eval.dense.resize(ny, nx);
    for (auto& g : ops.grad) g.is_dense = dense;
    if (dense && opt.keep_gradients)
        for (auto& g : ops.grad) g.dense.resize(ny, nx);

    Eigen::MatrixXd a_acc, b_acc;
    if (dense) a_acc.setZero(nx, nx), b_acc.setZero(nx, nx);
    std::vector<Eigen::Triplet<double>> te;
    std::array<std::vector<Eigen::Triplet<double>>, 3> tg;

    const auto chunk = static_cast<Eigen::Index>(std::max<std::size_t>(opt.chunk, 1));
    for (Eigen::Index r0 = 0; r0 < ny; r0 += chunk) {
        const Eigen::Index rows = std::min(chunk, ny - r0);
        Eigen::MatrixXd k(rows, nx);
        std::array<Eigen::MatrixXd, 3> g;
        for (auto& gi : g) gi.resize(rows, nx);
        for (Eigen::Index j = 0; j < nx; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) {
                const Vec3& z = y[static_cast<std::size_t>(r0 + i)];
                const Vec3& c = x[static_cast<std::size_t>(j)];
                k(i, j) = psi(basis.kernel, (z - c).norm());
                const Vec3 gr = grad_psi_ambient(basis.kernel, z, c);
                g[0](i, j) = gr[0], g[1](i, j) = gr[1], g[2](i, j) = gr[2];
            }
        Eigen::MatrixXd e = times_ct(k);
        std::array<Eigen::MatrixXd, 3> t;
        for (int d = 0; d < 3; ++d) t[d] = times_ct(g[d]);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const Vec3 n = surface.normal(y[static_cast<std::size_t>(r0 + i)]);
            const Eigen::RowVectorXd nd = n[0] * t[0].row(i) + n[1] * t[1].row(i) + n[2] * t[2].row(i);
            for (int d = 0; d < 3; ++d) t[d].row(i) -= n[d] * nd;
        }
        // numeric supports
        for (Eigen::Index j = 0; j < nx; ++j)
            for (Eigen::Index i = 0; i < rows; ++i)
                if ((y[static_cast<std::size_t>(r0 + i)] - x[static_cast<std::size_t>(j)]).norm() > reach[static_cast<std::size_t>(j)]) {
                    e(i, j) = 0;
                    for (auto& td : t) td(i, j) = 0;
                }
        if (dense) {
            const auto w = ops.weights.segment(r0, rows).asDiagonal();
            a_acc.noalias() += e.transpose() * (w * e);
            for (int d = 0; d < 3; ++d) b_acc.noalias() += t[d].transpose() * (w * t[d]);
            ops.eval.dense.middleRows(r0, rows) = e;
            if (opt.keep_gradients)
                for (int d = 0; d < 3; ++d) ops.grad[d].dense.middleRows(r0, rows) = t[d];
        } else {
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < nx; ++j) {
                    if (e(i, j) != 0) te.emplace_back(r0 + i, j, e(i, j));
                    for (int d = 0; d < 3; ++d)
                        if (t[d](i, j) != 0) tg[d].emplace_back(r0 + i, j, t[d](i, j));
                }
        }
    }

    if (!dense) {
        ops.eval.sparse.resize(ny, nx);
        ops.eval.sparse.setFromTriplets(te.begin(), te.end());
        const SparseMatrix e = ops.eval.sparse;
        const SparseMatrix we = ops.weights.asDiagonal() * e;
        const SparseMatrix a = SparseMatrix(e.transpose()) * we;
        SparseMatrix bm(nx, nx);
        for (int d = 0; d < 3; ++d) {
            SparseRowMatrix gd(ny, nx);
            gd.setFromTriplets(tg[d].begin(), tg[d].end());
            const SparseMatrix gc = gd;
            const SparseMatrix wg = ops.weights.asDiagonal() * gc;
            bm += SparseMatrix(SparseMatrix(gc.transpose()) * wg);
            if (opt.keep_gradients) ops.grad[d].sparse = std::move(gd);
        }
        a_acc = Eigen::MatrixXd(a);
        b_acc = Eigen::MatrixXd(bm);
    }
    ops.A = detail::symmetric_sparse(a_acc, basis);
    ops.B = detail::symmetric_sparse(b_acc, basis);
    return ops;
}

/// lambda_eta = c_react Q_Y(DQ(u_a, u_b) chi_eta).
inline Eigen::VectorXd avf_nonlinear_vector(const GalerkinOperators& ops, const EnergySpec& spec, const Eigen::VectorXd& a,
                                            const Eigen::VectorXd& b) {
    if (a.size() != static_cast<Eigen::Index>(ops.size()) || b.size() != a.size())
        throw LengthMismatch("coefficient vectors must have length N_X");
    const Eigen::VectorXd ua = ops.eval.apply(a), ub = ops.eval.apply(b);
    Eigen::VectorXd v(ua.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = ops.weights[i] * spec.dq(ua[i], ub[i]);
    return spec.c_react * ops.eval.apply_transpose(v);
}

/// g(alpha) = c_react Q_Y(G'(u_h) chi_eta).
inline Eigen::VectorXd nonlinear_vector(const GalerkinOperators& ops, const EnergySpec& spec, const Eigen::VectorXd& a) {
    const Eigen::VectorXd u = ops.eval.apply(a);
    Eigen::VectorXd v(u.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = ops.weights[i] * spec.dG(u[i]);
    return spec.c_react * ops.eval.apply_transpose(v);
}

inline double discrete_energy(const GalerkinOperators& ops, const EnergySpec& spec, const Eigen::VectorXd& a) {
    const Eigen::VectorXd u = ops.eval.apply(a);
    double pot = 0;
    for (Eigen::Index i = 0; i < u.size(); ++i) pot += ops.weights[i] * spec.G(u[i]);
    return 0.5 * spec.c_grad * a.dot(ops.B * a) + spec.c_react * pot;
}

/// [Q_Y(f chi_eta)]_eta for samples f at the quadrature nodes.
inline Eigen::VectorXd galerkin_rhs_vector(const GalerkinOperators& ops, const Eigen::VectorXd& f) {
    if (f.size() != ops.weights.size()) throw LengthMismatch("forcing must be sampled at every quadrature node");
    return ops.eval.apply_transpose(ops.weights.cwiseProduct(f));
}

/// L2 projection of samples at Y onto the span of the basis: A alpha = [Q_Y(f chi)].
inline Eigen::VectorXd l2_project(const GalerkinOperators& ops, const Eigen::VectorXd& f) {
    const Eigen::LLT<Eigen::MatrixXd> llt{Eigen::MatrixXd(ops.A)};
    if (llt.info() != Eigen::Success) throw LinearSolveFailure("mass matrix is not positive definite");
    return llt.solve(galerkin_rhs_vector(ops, f));
}

inline void save_matrix_market(const std::filesystem::path& path, const SparseMatrix& m) {
    if (!Eigen::saveMarket(m, path.string())) throw Error("cannot write " + path.string());
}

}  // namespace surfgal
