#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "fixtures.hpp"

namespace oracles {

using namespace surfgal;

// K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt, trapezoid rule.  The
// integrand is even and analytic in t, so the rule converges geometrically.
inline double bessel_k(double nu, double z) {
    const double h = 0.005;
    double s = 0.5 * std::exp(-z);
    for (int i = 1;; ++i) {
        const double t = i * h;
        const double term = std::exp(-z * std::cosh(t) + nu * t) * 0.5 * (1 + std::exp(-2 * nu * t));
        s += term;
        if (z * std::cosh(t) - nu * t > 745) break;
    }
    return s * h;
}

inline double matern_oracle(int m, double eps, double r) {
    const double nu = m - 1.5, z = eps * r;
    return std::pow(2.0, 1 - nu) / std::tgamma(nu) * std::pow(z, nu) * bessel_k(nu, z);
}

// One AVF Allen-Cahn step with explicit inverses and a point-by-point basis table;
// the nonlinearity is iterated to a fixed point.
inline Eigen::VectorXd brute_avf_step(const fixtures::Problem& p, const EnergySpec& spec, double dt, const Eigen::VectorXd& a0) {
    const auto nx = static_cast<Eigen::Index>(p.basis.size()), ny = static_cast<Eigen::Index>(p.rule.size());
    Eigen::MatrixXd phi(ny, nx);
    for (Eigen::Index i = 0; i < ny; ++i)
        for (Eigen::Index j = 0; j < nx; ++j)
            phi(i, j) = eval_basis(p.basis, static_cast<std::size_t>(j), p.rule.nodes.points[static_cast<std::size_t>(i)]);
    const Eigen::MatrixXd ainv = Eigen::MatrixXd(p.ops.A).inverse();
    const Eigen::MatrixXd k = ainv * Eigen::MatrixXd(p.ops.B) * (0.5 * dt * spec.c_grad);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(nx, nx);
    const Eigen::MatrixXd left_inv = (id + k).inverse();
    auto lambda = [&](const Eigen::VectorXd& b) {
        const Eigen::VectorXd u0 = phi * a0, u1 = phi * b;
        Eigen::VectorXd l = Eigen::VectorXd::Zero(nx);
        for (Eigen::Index i = 0; i < ny; ++i) {
            const double a = u0[i], c = u1[i];
            const double dq = std::abs(c - a) > 1e-4 ? (spec.G(c) - spec.G(a)) / (c - a) : spec.dq(a, c);
            l += p.rule.weights[static_cast<std::size_t>(i)] * dq * phi.row(i).transpose();
        }
        return Eigen::VectorXd(spec.c_react * l);
    };
    Eigen::VectorXd a = a0;
    for (int it = 0; it < 500; ++it) {
        const Eigen::VectorXd next = left_inv * ((id - k) * a0 - dt * ainv * lambda(a));
        const double change = (next - a).norm();
        a = next;
        if (change < 1e-15 * a.norm()) break;
    }
    return a;
}

}  // namespace oracles
