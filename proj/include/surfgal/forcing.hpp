#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "galerkin.hpp"
#include "surface.hpp"

namespace surfgal {

/// Exact solution u(x, t) together with u_t and the surface Laplacian.
struct Manufactured {
    std::function<double(const Vec3&, double)> u, u_t, laplacian;

    Eigen::VectorXd sample(const std::vector<Vec3>& pts, double t) const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(pts.size()));
        for (std::size_t i = 0; i < pts.size(); ++i) v[static_cast<Eigen::Index>(i)] = u(pts[i], t);
        return v;
    }

    /// f = u_t - c_grad lap u + c_react G'(u)
    double source(const EnergySpec& spec, const Vec3& x, double t) const {
        return u_t(x, t) - spec.c_grad * laplacian(x, t) + spec.c_react * spec.dG(u(x, t));
    }

    std::function<Eigen::VectorXd(double)> forcing(const std::vector<Vec3>& pts, const EnergySpec& spec) const {
        return [self = *this, pts, spec](double t) {
            Eigen::VectorXd f(static_cast<Eigen::Index>(pts.size()));
            for (std::size_t i = 0; i < pts.size(); ++i) f[static_cast<Eigen::Index>(i)] = self.source(spec, pts[i], t);
            return f;
        };
    }
};

/// u = tanh(x1 + x2 + x3 - t) on the unit sphere.
inline Manufactured sphere_tanh() {
    Manufactured m;
    m.u = [](const Vec3& x, double t) { return std::tanh(x.sum() - t); };
    m.u_t = [](const Vec3& x, double t) {
        const double th = std::tanh(x.sum() - t);
        return -(1 - th * th);
    };
    // lap tanh(a.x - t) = tanh'' (|a|^2 - (a.x)^2) + tanh' (-2 a.x), with a = (1, 1, 1)
    m.laplacian = [](const Vec3& x, double t) {
        const double ax = x.sum(), th = std::tanh(ax - t);
        const double d1 = 1 - th * th, d2 = -2 * th * d1;
        return d2 * (3 - ax * ax) - 2 * ax * d1;
    };
    return m;
}

namespace detail {

// p(x) = x1 (x1^4 - 10 x1^2 x2^2 + 5 x2^4) (x1^2 + x2^2 - 60 x3^2) / 8 with gradient and Hessian.
struct TorusPoly {
    double value;
    Eigen::Vector3d grad;
    Eigen::Matrix3d hess;
};

inline TorusPoly torus_poly(const Vec3& x) {
    const double a1 = x[0], a2 = x[1], a3 = x[2];
    const double s = a1 * a1 * a1 * a1 * a1 - 10 * a1 * a1 * a1 * a2 * a2 + 5 * a1 * a2 * a2 * a2 * a2;
    const Eigen::Vector3d gs(5 * std::pow(a1, 4) - 30 * a1 * a1 * a2 * a2 + 5 * std::pow(a2, 4),
                             -20 * a1 * a1 * a1 * a2 + 20 * a1 * a2 * a2 * a2, 0);
    Eigen::Matrix3d hs = Eigen::Matrix3d::Zero();
    hs(0, 0) = 20 * a1 * a1 * a1 - 60 * a1 * a2 * a2;
    hs(0, 1) = hs(1, 0) = -60 * a1 * a1 * a2 + 20 * a2 * a2 * a2;
    hs(1, 1) = -20 * a1 * a1 * a1 + 60 * a1 * a2 * a2;
    const double q = a1 * a1 + a2 * a2 - 60 * a3 * a3;
    const Eigen::Vector3d gq(2 * a1, 2 * a2, -120 * a3);
    const Eigen::Matrix3d hq = Eigen::Vector3d(2, 2, -120).asDiagonal();
    return {s * q / 8, (q * gs + s * gq) / 8, (q * hs + gs * gq.transpose() + gq * gs.transpose() + s * hq) / 8};
}

}  // namespace detail

/// Laplace-Beltrami on a torus of radii (R, r) from the (theta, phi) metric,
/// given the ambient gradient and Hessian of f at x.
inline double torus_laplacian(const SurfaceModel& torus, const Vec3& x, const Eigen::Vector3d& g, const Eigen::Matrix3d& h) {
    const double big = torus.params()[0], r = torus.params()[1];
    const double th = std::atan2(x[1], x[0]);
    const double ph = std::atan2(x[2], std::hypot(x[0], x[1]) - big);
    const double rho = big + r * std::cos(ph);
    const Eigen::Vector3d xt(-rho * std::sin(th), rho * std::cos(th), 0);
    const Eigen::Vector3d xtt(-rho * std::cos(th), -rho * std::sin(th), 0);
    const Eigen::Vector3d xp(-r * std::sin(ph) * std::cos(th), -r * std::sin(ph) * std::sin(th), r * std::cos(ph));
    const Eigen::Vector3d xpp(-r * std::cos(ph) * std::cos(th), -r * std::cos(ph) * std::sin(th), -r * std::sin(ph));
    const double f_tt = xt.dot(h * xt) + g.dot(xtt);
    const double f_pp = xp.dot(h * xp) + g.dot(xpp);
    const double f_p = g.dot(xp);
    return f_tt / (rho * rho) + f_pp / (r * r) - std::sin(ph) / (rho * r) * f_p;
}

/// u = exp(-5t) p(x) on the torus.
inline Manufactured torus_polynomial(const SurfaceModel& torus) {
    if (torus.kind() != SurfaceKind::Torus) throw ConfigError("torus_polynomial needs a torus");
    Manufactured m;
    m.u = [](const Vec3& x, double t) { return std::exp(-5 * t) * detail::torus_poly(x).value; };
    m.u_t = [](const Vec3& x, double t) { return -5 * std::exp(-5 * t) * detail::torus_poly(x).value; };
    m.laplacian = [torus](const Vec3& x, double t) {
        const auto p = detail::torus_poly(x);
        return std::exp(-5 * t) * torus_laplacian(torus, x, p.grad, p.hess);
    };
    return m;
}

}  // namespace surfgal
