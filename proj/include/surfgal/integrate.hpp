#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "galerkin.hpp"
#include "linear_solver.hpp"

namespace surfgal {

enum class Scheme { AVF_AC, AVF_CH, CN_AC };

struct StepConfig {
    double dt = 1e-3;
    Scheme scheme = Scheme::AVF_AC;
    double nonlinear_tol = 1e-10;
    int max_iter = 100;
    double linear_tol = 1e-12;
    // Picard shift sigma * c_react * (A or B); leaves the fixed point unchanged.
    double stabilization = 0.5;
    SolverKind solver = SolverKind::Auto;

    void validate() const {
        if (!(dt > 0)) throw ConfigError("dt must be positive");
        if (!(nonlinear_tol > 0 && nonlinear_tol < 1)) throw ConfigError("nonlinear tolerance must lie in (0, 1)");
        if (!(linear_tol > 0 && linear_tol < 1)) throw ConfigError("linear tolerance must lie in (0, 1)");
        if (max_iter < 1) throw ConfigError("max_iter must be positive");
        if (stabilization < 0) throw ConfigError("stabilization must be nonnegative");
    }
};

struct FlowState {
    Eigen::VectorXd alpha;
    double t = 0;
    std::size_t n = 0;
};

struct EnergyRecord {
    std::size_t step = 0;
    double t = 0;
    double energy = 0;
    double maxu = 0;
    int iters = 0;
};

struct EnergyTrace {
    std::vector<EnergyRecord> rows;

    /// Largest E^n - E^{n-1}.
    double max_increase() const {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 1; i < rows.size(); ++i) m = std::max(m, rows[i].energy - rows[i - 1].energy);
        return m;
    }
    bool nonincreasing(double tol) const { return rows.size() < 2 || max_increase() <= tol; }

    void save_csv(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw Error("cannot write " + path.string());
        out << "step,t,energy,maxu,iters\n";
        out.precision(17);
        for (const auto& r : rows) out << r.step << ',' << r.t << ',' << r.energy << ',' << r.maxu << ',' << r.iters << '\n';
    }
};

/// Forcing samples at the quadrature nodes for a given time.
using Forcing = std::function<Eigen::VectorXd(double)>;

/// One-step maps for the AVF and Crank-Nicolson schemes. The system matrix is
/// factored once; each step runs a shifted Picard iteration on the nonlinear term.
class Stepper {
public:
    Stepper(const GalerkinOperators& ops, const EnergySpec& spec, const StepConfig& cfg) : ops_(&ops), spec_(spec), cfg_(cfg) {
        cfg.validate();
        const double dt = cfg.dt;
        shift_ = spec.potential == Potential::Zero ? 0.0 : cfg.stabilization * spec.c_react;
        if (cfg.scheme == Scheme::AVF_CH) {
            const Eigen::MatrixXd a(ops.A), b(ops.B);
            mass_ = SpdSolver(Eigen::SparseMatrix<double>(ops.A), cfg.solver, cfg.linear_tol);
            p_ = mass_.solve(b).transpose();  // B A^-1
            l_ = p_ * b;                       // B A^-1 B
            l_ = 0.5 * (l_ + l_.transpose()).eval();
            Eigen::MatrixXd m = a / dt + 0.5 * spec.c_grad * l_ + shift_ * b;
            system_ = SpdSolver(m);
        } else {
            const Eigen::SparseMatrix<double> m = ops.A * (1.0 / dt + shift_) + ops.B * (0.5 * spec.c_grad);
            system_ = SpdSolver(m, cfg.solver, cfg.linear_tol);
        }
    }

    FlowState step(const FlowState& s, const Forcing* forcing = nullptr) {
        const auto& ops = *ops_;
        const double dt = cfg_.dt;
        const Eigen::VectorXd& a0 = s.alpha;
        if (a0.size() != static_cast<Eigen::Index>(ops.size())) throw LengthMismatch("state length differs from N_X");
        if (!a0.allFinite()) throw ConfigError("state is not finite");
        Eigen::VectorXd f = Eigen::VectorXd::Zero(a0.size());
        if (forcing && *forcing) f = galerkin_rhs_vector(ops, (*forcing)(s.t + 0.5 * dt));

        const bool ch = cfg_.scheme == Scheme::AVF_CH;
        const Eigen::VectorXd aa0 = ops.A * a0;
        const Eigen::VectorXd known =
            aa0 / dt - 0.5 * spec_.c_grad * (ch ? Eigen::VectorXd(l_ * a0) : Eigen::VectorXd(ops.B * a0)) + f;
        const double scale = std::max({aa0.norm() / dt, f.norm(), std::numeric_limits<double>::min()});

        const Eigen::VectorXd u0 = ops.eval.apply(a0);
        Eigen::VectorXd a = a0;
        Eigen::VectorXd nl = nonlinear(u0, a);
        for (int it = 1; it <= cfg_.max_iter; ++it) {
            const Eigen::VectorXd shifted = shift_ * (ch ? Eigen::VectorXd(ops.B * a) : Eigen::VectorXd(ops.A * a));
            a = system_.solve(known - nl + shifted);
            nl = nonlinear(u0, a);
            const double r = residual(a0, a, nl, f).norm();
            if (!std::isfinite(r)) throw NonlinearDivergence(it, r);
            if (r <= cfg_.nonlinear_tol * scale) {
                last_iters_ = it;
                return {a, s.t + dt, s.n + 1};
            }
            if (it == cfg_.max_iter) throw NonlinearDivergence(it, r / scale);
        }
        return {};  // unreachable
    }

    /// Scheme residual at the candidate a1, in the units of A alpha / dt.
    Eigen::VectorXd residual(const Eigen::VectorXd& a0, const Eigen::VectorXd& a1, const Eigen::VectorXd& nl,
                             const Eigen::VectorXd& f) const {
        const auto& ops = *ops_;
        const Eigen::VectorXd mid = a0 + a1;
        const Eigen::VectorXd lin = cfg_.scheme == Scheme::AVF_CH ? Eigen::VectorXd(l_ * mid) : Eigen::VectorXd(ops.B * mid);
        return ops.A * (a1 - a0) / cfg_.dt + 0.5 * spec_.c_grad * lin + nl - f;
    }

    int last_iterations() const noexcept { return last_iters_; }
    const StepConfig& config() const noexcept { return cfg_; }

private:
    // AVF: c_react Q_Y(DQ(u0, u1) chi); CN: c_react Q_Y(G'((u0 + u1) / 2) chi). u0 is cached per step.
    Eigen::VectorXd nonlinear(const Eigen::VectorXd& u0, const Eigen::VectorXd& a1) const {
        const auto& ops = *ops_;
        const Eigen::VectorXd u1 = ops.eval.apply(a1);
        Eigen::VectorXd v(u1.size());
        if (cfg_.scheme == Scheme::CN_AC) {
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = ops.weights[i] * spec_.dG(0.5 * (u0[i] + u1[i]));
        } else {
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = ops.weights[i] * spec_.dq(u0[i], u1[i]);
        }
        const Eigen::VectorXd lam = spec_.c_react * ops.eval.apply_transpose(v);
        return cfg_.scheme == Scheme::AVF_CH ? Eigen::VectorXd(p_ * lam) : lam;
    }

    const GalerkinOperators* ops_;
    EnergySpec spec_;
    StepConfig cfg_;
    double shift_ = 0;
    SpdSolver system_, mass_;
    Eigen::MatrixXd p_, l_;
    int last_iters_ = 0;
};

inline FlowState step_ac(const GalerkinOperators& ops, const EnergySpec& spec, const StepConfig& cfg, const FlowState& s,
                         const Forcing* forcing = nullptr) {
    StepConfig c = cfg;
    if (c.scheme == Scheme::AVF_CH) c.scheme = Scheme::AVF_AC;
    return Stepper(ops, spec, c).step(s, forcing);
}

inline FlowState step_ch(const GalerkinOperators& ops, const EnergySpec& spec, const StepConfig& cfg, const FlowState& s) {
    StepConfig c = cfg;
    c.scheme = Scheme::AVF_CH;
    return Stepper(ops, spec, c).step(s);
}

inline EnergyRecord record(const GalerkinOperators& ops, const EnergySpec& spec, const FlowState& s, int iters) {
    return {s.n, s.t, discrete_energy(ops, spec, s.alpha), ops.eval.apply(s.alpha).cwiseAbs().maxCoeff(), iters};
}

using Observer = std::function<void(const FlowState&, const EnergyRecord&)>;

/// Advances init to time T in T/dt steps, recording the energy after every step.
inline std::pair<FlowState, EnergyTrace> run(const GalerkinOperators& ops, const EnergySpec& spec, const StepConfig& cfg,
                                             const FlowState& init, double T, const std::vector<Observer>& observers = {},
                                             const Forcing& forcing = {}) {
    const double steps = (T - init.t) / cfg.dt;
    const auto n = static_cast<std::size_t>(std::llround(steps));
    if (steps < 0 || std::abs(steps - static_cast<double>(n)) > 1e-8 * std::max(1.0, steps))
        throw ConfigError("dt does not divide the time interval");
    Stepper stepper(ops, spec, cfg);
    EnergyTrace trace;
    FlowState s = init;
    trace.rows.push_back(record(ops, spec, s, 0));
    for (const auto& o : observers) o(s, trace.rows.back());
    for (std::size_t k = 0; k < n; ++k) {
        try {
            s = stepper.step(s, &forcing);
        } catch (const Error& e) {
            throw StepFailure(s.n + 1, e.what());
        }
        s.t = init.t + static_cast<double>(k + 1) * cfg.dt;  // no drift from repeated addition
        trace.rows.push_back(record(ops, spec, s, stepper.last_iterations()));
        for (const auto& o : observers) o(s, trace.rows.back());
    }
    return {s, trace};
}

}  // namespace surfgal
