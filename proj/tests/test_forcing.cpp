#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "surfgal/forcing.hpp"
#include "surfgal/rng.hpp"

using namespace surfgal;

namespace {

// 4th-order central second and first differences of g along one parameter.
template <class F>
std::pair<double, double> central(F g, double h) {
    const double d2 = (-g(2 * h) + 16 * g(h) - 30 * g(0) + 16 * g(-h) - g(-2 * h)) / (12 * h * h);
    const double d1 = (-g(2 * h) + 8 * g(h) - 8 * g(-h) + g(-2 * h)) / (12 * h);
    return {d2, d1};
}

}  // namespace

TEST(Manufactured, SphereLaplacianMatchesSphericalCoordinates) {
    const auto s = SurfaceModel::unit_sphere();
    const auto m = sphere_tanh();
    const CounterRng rng(5);
    for (std::uint64_t k = 0; k < 40; ++k) {
        const double u = rng.uniform(2 * k, 0, 2 * std::numbers::pi), v = rng.uniform(2 * k + 1, 0.3, 2.8);
        const double t = 0.37;
        auto f = [&](double du, double dv) { return m.u(s.parametrize(u + du, v + dv), t); };
        const auto [fuu, fu] = central([&](double d) { return f(d, 0); }, 1e-3);
        const auto [fvv, fv] = central([&](double d) { return f(0, d); }, 1e-3);
        (void)fu;
        const double sv = std::sin(v), lap = fvv + std::cos(v) / sv * fv + fuu / (sv * sv);
        EXPECT_NEAR(m.laplacian(s.parametrize(u, v), t), lap, 1e-7);
    }
}

TEST(Manufactured, TorusLaplacianMatchesParameterMetric) {
    const auto torus = SurfaceModel::torus();
    const double big = torus.params()[0], r = torus.params()[1];
    const auto m = torus_polynomial(torus);
    const CounterRng rng(6);
    for (std::uint64_t k = 0; k < 40; ++k) {
        const double th = rng.uniform(2 * k, 0, 2 * std::numbers::pi), ph = rng.uniform(2 * k + 1, 0, 2 * std::numbers::pi);
        const double t = 0.1;
        auto f = [&](double dt_, double dp) { return m.u(torus.parametrize(th + dt_, ph + dp), t); };
        const auto [ftt, ft] = central([&](double d) { return f(d, 0); }, 1e-3);
        const auto [fpp, fp] = central([&](double d) { return f(0, d); }, 1e-3);
        (void)ft;
        const double rho = big + r * std::cos(ph);
        const double lap = ftt / (rho * rho) + fpp / (r * r) - std::sin(ph) / (rho * r) * fp;
        EXPECT_NEAR(m.laplacian(torus.parametrize(th, ph), t), lap, 1e-6 * (1 + std::abs(lap)));
    }
}

TEST(Manufactured, TimeDerivatives) {
    const auto s = SurfaceModel::torus();
    for (const auto& m : {sphere_tanh(), torus_polynomial(s)}) {
        const Vec3 x = s.parametrize(0.7, 1.9);
        const double h = 1e-4, t = 0.2;
        const double fd = (m.u(x, t + h) - m.u(x, t - h)) / (2 * h);
        EXPECT_NEAR(m.u_t(x, t), fd, 1e-7);
    }
}

TEST(Manufactured, SourceCombinesTerms) {
    const auto m = sphere_tanh();
    const EnergySpec spec(1.0, 1.0);
    const Vec3 x = Vec3(1, 2, 2) / 3.0;
    const double u = m.u(x, 0.1);
    EXPECT_NEAR(m.source(spec, x, 0.1), m.u_t(x, 0.1) - m.laplacian(x, 0.1) + u * u * u - u, 1e-15);
    const auto f = m.forcing({x, -x}, spec)(0.1);
    ASSERT_EQ(f.size(), 2);
    EXPECT_DOUBLE_EQ(f[0], m.source(spec, x, 0.1));
}

TEST(Manufactured, TorusPolynomialNeedsTorus) {
    EXPECT_THROW(torus_polynomial(SurfaceModel::unit_sphere()), ConfigError);
}
