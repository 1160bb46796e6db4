#pragma once

#include <memory>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "error.hpp"

namespace surfgal {

enum class SolverKind { Auto, Dense, SparseCholesky, Pcg };

/// Factor-once SPD solver. Auto picks dense Cholesky for small or well-filled
/// matrices and a sparse Cholesky otherwise.
class SpdSolver {
public:
    SpdSolver() = default;

    explicit SpdSolver(const Eigen::SparseMatrix<double>& m, SolverKind kind = SolverKind::Auto, double tol = 1e-12) {
        const auto n = m.rows();
        if (kind == SolverKind::Auto) {
            const double fill = static_cast<double>(m.nonZeros()) / (static_cast<double>(n) * static_cast<double>(n));
            kind = (n <= 1500 || (fill > 0.05 && n <= 8000)) ? SolverKind::Dense : SolverKind::SparseCholesky;
        }
        kind_ = kind;
        switch (kind) {
            case SolverKind::Dense: factor_dense(Eigen::MatrixXd(m)); break;
            case SolverKind::SparseCholesky:
                sparse_ = std::make_shared<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>(m);
                if (sparse_->info() != Eigen::Success) throw LinearSolveFailure("sparse Cholesky failed");
                break;
            case SolverKind::Pcg:
                pcg_ = std::make_shared<Pcg>();
                pcg_->setTolerance(tol);
                pcg_->compute(m);
                if (pcg_->info() != Eigen::Success) throw LinearSolveFailure("incomplete Cholesky failed");
                break;
            case SolverKind::Auto: break;
        }
    }

    explicit SpdSolver(const Eigen::MatrixXd& m) : kind_(SolverKind::Dense) { factor_dense(m); }

    SolverKind kind() const noexcept { return kind_; }

    template <typename Rhs>
    Eigen::MatrixXd solve(const Eigen::MatrixBase<Rhs>& b) const {
        switch (kind_) {
            case SolverKind::Dense: return dense_->solve(b);
            case SolverKind::SparseCholesky: return sparse_->solve(b.derived().eval());
            case SolverKind::Pcg: {
                Eigen::MatrixXd x(b.rows(), b.cols());
                for (Eigen::Index j = 0; j < b.cols(); ++j) {
                    x.col(j) = pcg_->solve(b.col(j).eval());
                    if (pcg_->info() != Eigen::Success) throw LinearSolveFailure("conjugate gradients did not converge");
                }
                return x;
            }
            case SolverKind::Auto: break;
        }
        throw LinearSolveFailure("solver not initialised");
    }

private:
    using Pcg = Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                                         Eigen::IncompleteCholesky<double>>;

    void factor_dense(const Eigen::MatrixXd& m) {
        dense_ = std::make_shared<Eigen::LLT<Eigen::MatrixXd>>(m);
        if (dense_->info() != Eigen::Success) throw LinearSolveFailure("matrix is not positive definite");
    }

    SolverKind kind_ = SolverKind::Auto;
    std::shared_ptr<Eigen::LLT<Eigen::MatrixXd>> dense_;
    std::shared_ptr<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> sparse_;
    std::shared_ptr<Pcg> pcg_;
};

}  // namespace surfgal
