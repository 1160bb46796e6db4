#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "error.hpp"

namespace surfgal {

using Vec3 = Eigen::Vector3d;

enum class SurfaceKind { UnitSphere, Torus, Ellipsoid, DupinCyclide };

inline std::string to_string(SurfaceKind kind) {
    switch (kind) {
        case SurfaceKind::UnitSphere: return "sphere";
        case SurfaceKind::Torus: return "torus";
        case SurfaceKind::Ellipsoid: return "ellipsoid";
        case SurfaceKind::DupinCyclide: return "cyclide";
    }
    return "unknown";
}

/// A closed smooth surface given as the zero set of a level function F, with
/// F < 0 inside so that grad F points outward.
///
/// Torus(R, r):          (sqrt(x^2+y^2) - R)^2 + z^2 - r^2
/// Ellipsoid(a, b, c):   x^2/a^2 + y^2/b^2 + z^2/c^2 - 1
/// DupinCyclide(a,b,d):  (|x|^2 + b^2 - d^2)^2 - 4 (a x + c d)^2 - 4 b^2 y^2, c^2 = a^2 - b^2
class SurfaceModel {
public:
    static SurfaceModel unit_sphere() { return SurfaceModel(SurfaceKind::UnitSphere, {}); }
    static SurfaceModel torus(double R = 1.0, double r = 1.0 / 3.0) {
        if (!(R > r && r > 0)) throw ConfigError("torus requires R > r > 0");
        return SurfaceModel(SurfaceKind::Torus, {R, r, 0, 0});
    }
    static SurfaceModel ellipsoid(double a = 2.0, double b = 1.0, double c = 1.5) {
        if (!(a > 0 && b > 0 && c > 0)) throw ConfigError("ellipsoid semi-axes must be positive");
        return SurfaceModel(SurfaceKind::Ellipsoid, {a, b, c, 0});
    }
    static SurfaceModel dupin_cyclide(double a = 2.0, double b = 1.9, double d = 1.0) {
        if (!(a > b && b > 0)) throw ConfigError("cyclide requires a > b > 0");
        const double c = std::sqrt(a * a - b * b);
        if (!(c < d && d < a)) throw ConfigError("cyclide requires c < d < a (ring cyclide)");
        return SurfaceModel(SurfaceKind::DupinCyclide, {a, b, c, d});
    }

    SurfaceKind kind() const noexcept { return kind_; }
    /// Shape parameters: torus (R, r); ellipsoid (a, b, c); cyclide (a, b, c, d).
    const std::array<double, 4>& params() const noexcept { return p_; }
    std::string name() const { return to_string(kind_); }

    double level(const Vec3& x) const {
        switch (kind_) {
            case SurfaceKind::UnitSphere: return x.squaredNorm() - 1.0;
            case SurfaceKind::Torus: {
                const double rho = std::hypot(x[0], x[1]);
                return (rho - p_[0]) * (rho - p_[0]) + x[2] * x[2] - p_[1] * p_[1];
            }
            case SurfaceKind::Ellipsoid:
                return sq(x[0] / p_[0]) + sq(x[1] / p_[1]) + sq(x[2] / p_[2]) - 1.0;
            case SurfaceKind::DupinCyclide: {
                const auto [a, b, c, d] = p_;
                const double s = x.squaredNorm() + b * b - d * d;
                return s * s - 4.0 * sq(a * x[0] + c * d) - 4.0 * b * b * x[1] * x[1];
            }
        }
        return 0.0;
    }

    Vec3 gradient(const Vec3& x) const {
        switch (kind_) {
            case SurfaceKind::UnitSphere: return 2.0 * x;
            case SurfaceKind::Torus: {
                const double rho = std::hypot(x[0], x[1]);
                if (rho == 0.0) return Vec3(0, 0, 2.0 * x[2]);
                const double f = 2.0 * (rho - p_[0]) / rho;
                return Vec3(f * x[0], f * x[1], 2.0 * x[2]);
            }
            case SurfaceKind::Ellipsoid:
                return Vec3(2 * x[0] / sq(p_[0]), 2 * x[1] / sq(p_[1]), 2 * x[2] / sq(p_[2]));
            case SurfaceKind::DupinCyclide: {
                const auto [a, b, c, d] = p_;
                const double s = x.squaredNorm() + b * b - d * d;
                Vec3 g = 4.0 * s * x;
                g[0] -= 8.0 * a * (a * x[0] + c * d);
                g[1] -= 8.0 * b * b * x[1];
                return g;
            }
        }
        return Vec3::Zero();
    }

    /// Outward unit normal at a surface point.
    Vec3 normal(const Vec3& x) const {
        const Vec3 g = gradient(x);
        const double n = g.norm();
        if (n < 1e-14) throw DegenerateGradient("level-set gradient vanishes at the query point");
        return g / n;
    }

    /// Closest-point style projection onto the surface.  The unit sphere uses
    /// the exact radial map; other surfaces use a damped Newton iteration along
    /// grad F, restarted from the nearest point of a coarse parametric sample
    /// when the first attempt fails.
    Vec3 project(const Vec3& x) const {
        if (kind_ == SurfaceKind::UnitSphere) {
            const double n = x.norm();
            if (n == 0.0) throw NonConvergence("origin has no radial projection onto the sphere");
            return x / n;
        }
        if (auto y = newton_project(x)) return *y;
        if (auto y = newton_project(closest_sample(x))) return *y;
        throw NonConvergence("Newton projection did not converge in 50 iterations");
    }

    /// Point on the surface for parameters (u, v) in [0, 2pi) x [0, 2pi) for
    /// torus and cyclide, (azimuth, colatitude) in [0, 2pi) x [0, pi] otherwise.
    Vec3 parametrize(double u, double v) const {
        switch (kind_) {
            case SurfaceKind::UnitSphere:
                return Vec3(std::sin(v) * std::cos(u), std::sin(v) * std::sin(u), std::cos(v));
            case SurfaceKind::Ellipsoid:
                return Vec3(p_[0] * std::sin(v) * std::cos(u), p_[1] * std::sin(v) * std::sin(u),
                            p_[2] * std::cos(v));
            case SurfaceKind::Torus: {
                const double w = p_[0] + p_[1] * std::cos(v);
                return Vec3(w * std::cos(u), w * std::sin(u), p_[1] * std::sin(v));
            }
            case SurfaceKind::DupinCyclide: {
                const auto [a, b, c, d] = p_;
                const double cu = std::cos(u), cv = std::cos(v);
                const double den = a - c * cu * cv;
                // Standard parametrization of (..)^2 - 4(a x - c d)^2 - .., mirrored in x.
                const double x = (d * (c - a * cu * cv) + b * b * cu) / den;
                return Vec3(-x, b * std::sin(u) * (a - d * cv) / den, b * std::sin(v) * (c * cu - d) / den);
            }
        }
        return Vec3::Zero();
    }

    /// Analytic surface area where a closed form exists.
    std::optional<double> area() const {
        switch (kind_) {
            case SurfaceKind::UnitSphere: return 4.0 * std::numbers::pi;
            case SurfaceKind::Torus: return 4.0 * std::numbers::pi * std::numbers::pi * p_[0] * p_[1];
            default: return std::nullopt;
        }
    }

    /// Length scale below which the surface may fold back on itself.
    double feature_size() const {
        switch (kind_) {
            case SurfaceKind::UnitSphere: return 1.0;
            case SurfaceKind::Torus: return p_[1];
            case SurfaceKind::Ellipsoid: {
                const double lo = std::min({p_[0], p_[1], p_[2]});
                const double hi = std::max({p_[0], p_[1], p_[2]});
                return lo * lo / hi;
            }
            case SurfaceKind::DupinCyclide: return p_[3] - p_[2];
        }
        return 1.0;
    }

private:
    SurfaceModel(SurfaceKind kind, std::array<double, 4> p) : kind_(kind), p_(p) {}

    static double sq(double v) { return v * v; }

    std::optional<Vec3> newton_project(Vec3 y) const {
        const double cap = 0.5 * feature_size();
        for (int it = 0; it < 50; ++it) {
            const double f = level(y);
            if (std::abs(f) <= 1e-14) return y;
            const Vec3 g = gradient(y);
            const double gg = g.squaredNorm();
            if (gg < 1e-28) return std::nullopt;
            Vec3 step = (f / gg) * g;
            const double len = step.norm();
            if (len > cap) step *= cap / len;
            y -= step;
            if (len < 1e-15 * (1.0 + y.norm())) return std::abs(level(y)) <= 1e-10 ? std::optional(y) : std::nullopt;
        }
        return std::abs(level(y)) <= 1e-10 ? std::optional(y) : std::nullopt;
    }

    Vec3 closest_sample(const Vec3& x) const {
        constexpr int nu = 96, nv = 48;
        const bool periodic_v = kind_ == SurfaceKind::Torus || kind_ == SurfaceKind::DupinCyclide;
        Vec3 best = parametrize(0, 0);
        double best_d = (best - x).squaredNorm();
        for (int i = 0; i < nu; ++i) {
            for (int j = 0; j <= nv; ++j) {
                const double u = 2.0 * std::numbers::pi * i / nu;
                const double v = (periodic_v ? 2.0 : 1.0) * std::numbers::pi * j / nv;
                const Vec3 y = parametrize(u, v);
                const double dd = (y - x).squaredNorm();
                if (dd < best_d) { best_d = dd; best = y; }
            }
        }
        return best;
    }

    SurfaceKind kind_;
    std::array<double, 4> p_;
};

}  // namespace surfgal
