#pragma once

#include <array>
#include <cmath>

#include "error.hpp"
#include "surface.hpp"

namespace surfgal {

/// Matérn kernel psi_m(r) = C_m (eps r)^nu K_nu(eps r), nu = m - 3/2, normalized to psi(0) = 1.
/// Restricted to a surface it reproduces a Sobolev space of order m - 1/2.
struct KernelSpec {
    int m = 3;
    double epsilon = 14.0;

    KernelSpec() = default;
    KernelSpec(int m_, double eps) : m(m_), epsilon(eps) {
        if (m < 2 || m > 6) throw ConfigError("kernel order m must be in 2..6");
        if (!(epsilon > 0)) throw ConfigError("kernel shape parameter must be positive");
    }

    double nu() const noexcept { return m - 1.5; }
    double surface_smoothness() const noexcept { return m - 0.5; }
};

/// Values below this are treated as exact zeros during assembly.
inline constexpr double kDropThreshold = 1e-14;

namespace detail {
// psi = exp(-z) P(z); P coefficients in ascending powers.
inline constexpr std::array<std::array<double, 5>, 5> kMaternPoly = {{
    {1, 0, 0, 0, 0},
    {1, 1, 0, 0, 0},
    {1, 1, 1.0 / 3, 0, 0},
    {1, 1, 2.0 / 5, 1.0 / 15, 0},
    {1, 1, 3.0 / 7, 2.0 / 21, 1.0 / 105},
}};
// For m >= 3: dpsi/dz = -z Q(z) exp(-z) with Q = (P - P') / z.
inline constexpr std::array<std::array<double, 4>, 5> kMaternDeriv = {{
    {0, 0, 0, 0},
    {1, 0, 0, 0},
    {1.0 / 3, 1.0 / 3, 0, 0},
    {1.0 / 5, 1.0 / 5, 1.0 / 15, 0},
    {1.0 / 7, 1.0 / 7, 2.0 / 35, 1.0 / 105},
}};

template <std::size_t N>
inline double horner(const std::array<double, N>& c, double z) {
    double s = 0;
    for (std::size_t i = N; i-- > 0;) s = s * z + c[i];
    return s;
}
}  // namespace detail

inline double psi(const KernelSpec& k, double r) {
    const double z = k.epsilon * r;
    return std::exp(-z) * detail::horner(detail::kMaternPoly[k.m - 2], z);
}

/// d psi / d r.  For m = 2 the one-sided limit at r = 0 is -eps; it is reported as 0
/// there, in line with the zero gradient at coincident points.
inline double dpsi(const KernelSpec& k, double r) {
    const double z = k.epsilon * r;
    if (k.m == 2) return r > 0 ? -k.epsilon * std::exp(-z) : 0.0;
    return -k.epsilon * z * detail::horner(detail::kMaternDeriv[k.m - 2], z) * std::exp(-z);
}

/// grad_x psi(|x - y|).
inline Vec3 grad_psi_ambient(const KernelSpec& k, const Vec3& x, const Vec3& y) {
    const Vec3 d = x - y;
    const double z = k.epsilon * d.norm();
    if (k.m == 2) {
        if (z == 0.0) return Vec3::Zero();
        return (-k.epsilon * k.epsilon * std::exp(-z) / z) * d;
    }
    return (-k.epsilon * k.epsilon * detail::horner(detail::kMaternDeriv[k.m - 2], z) * std::exp(-z)) * d;
}

/// Tangential part (I - n n^T) grad_x psi at zeta on the surface.
inline Vec3 surface_grad_psi(const KernelSpec& k, const SurfaceModel& s, const Vec3& zeta, const Vec3& eta) {
    const Vec3 g = grad_psi_ambient(k, zeta, eta);
    const Vec3 n = s.normal(zeta);
    return g - n.dot(g) * n;
}

}  // namespace surfgal
