#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "surfgal/kernel.hpp"
#include "surfgal/nodes.hpp"
#include "surfgal/rng.hpp"

using namespace surfgal;

using oracles::matern_oracle;

TEST(Psi, NormalizedAtOrigin) {
    for (int m = 2; m <= 6; ++m) EXPECT_EQ(psi(KernelSpec(m, 3.7), 0.0), 1.0);
}

TEST(Psi, MatchesBesselOracle) {
    const CounterRng rng(11);
    double worst = 0;
    for (std::uint64_t k = 0; k < 1000; ++k) {
        const int m = 2 + static_cast<int>(rng.bits(3 * k) % 5);
        const double eps = rng.uniform(3 * k + 1, 1.0, 20.0);
        const double r = 3.0 * (1.0 - rng.uniform(3 * k + 2));  // (0, 3]
        worst = std::max(worst, std::abs(psi(KernelSpec(m, eps), r) - matern_oracle(m, eps, r)));
    }
    EXPECT_LE(worst, 1e-12);
}

TEST(Psi, SpecificValue) {
    EXPECT_NEAR(psi(KernelSpec(3, 14), 0.1), matern_oracle(3, 14, 0.1), 1e-12);
    EXPECT_NEAR(psi(KernelSpec(3, 14), 0.1), 2.4 * std::exp(-1.4), 1e-15);
}

TEST(Psi, NegligibleBeyondSixty) {
    for (int m = 2; m <= 6; ++m) {
        const KernelSpec k(m, 5.0);
        EXPECT_LT(psi(k, 60.0 / 5.0 + 1e-9), 1e-12);
        const double z = 61.0;
        const double asym = std::sqrt(std::numbers::pi / (2 * z)) * std::exp(-z) * std::pow(2.0, 1 - k.nu()) /
                            std::tgamma(k.nu()) * std::pow(z, k.nu());
        EXPECT_LE(psi(k, z / 5.0), 2 * asym);
    }
}

TEST(Psi, MonotoneDecreasing) {
    for (int m = 2; m <= 6; ++m) {
        const KernelSpec k(m, 8.0);
        double prev = 1.0;
        for (double r = 1e-3; r < 5; r += 1e-3) {
            const double v = psi(k, r);
            EXPECT_LT(v, prev);
            prev = v;
        }
    }
}

TEST(Psi, SmoothAtOriginForMAtLeast3) {
    for (int m = 3; m <= 6; ++m) {
        const KernelSpec k(m, 1.0);
        const double h = 2e-4;
        auto f = [&](double s) { return psi(k, std::abs(s)); };
        const double right = (2 * f(0) - 5 * f(h) + 4 * f(2 * h) - f(3 * h)) / (h * h);
        const double left = (2 * f(0) - 5 * f(-h) + 4 * f(-2 * h) - f(-3 * h)) / (h * h);
        EXPECT_NEAR(right, left, 1e-6);
        EXPECT_NEAR(right, -1.0 / (2 * m - 5), 1e-6) << m;  // psi''(0) = -eps^2 Q(0)
    }
}

TEST(Psi, DerivativeMatchesFiniteDifference) {
    for (int m = 2; m <= 6; ++m) {
        const KernelSpec k(m, 6.0);
        for (double r = 0.01; r < 2; r += 0.07) {
            const double fd = (psi(k, r + 1e-6) - psi(k, r - 1e-6)) / 2e-6;
            EXPECT_NEAR(dpsi(k, r), fd, 1e-7 * (1 + std::abs(fd)));
        }
    }
}

TEST(Spec, Validation) {
    EXPECT_THROW(KernelSpec(1, 1.0), ConfigError);
    EXPECT_THROW(KernelSpec(3, 0.0), ConfigError);
    EXPECT_DOUBLE_EQ(KernelSpec(5, 8).surface_smoothness(), 4.5);
}

TEST(GradPsi, ZeroAtCoincidentPoints) {
    for (int m = 2; m <= 6; ++m) EXPECT_EQ(grad_psi_ambient(KernelSpec(m, 9), Vec3(1, 2, 3), Vec3(1, 2, 3)), Vec3::Zero());
}

TEST(GradPsi, FiniteDifferenceAndAntisymmetry) {
    const CounterRng rng(5);
    const double h = 1e-5;
    for (std::uint64_t i = 0; i < 100; ++i) {
        const std::uint64_t k = 8 * i;
        const KernelSpec spec(2 + static_cast<int>(rng.bits(k) % 5), rng.uniform(k + 1, 1, 20));
        const Vec3 x(rng.uniform(k + 2, -1, 1), rng.uniform(k + 3, -1, 1), rng.uniform(k + 4, -1, 1));
        const Vec3 y(rng.uniform(k + 5, -1, 1), rng.uniform(k + 6, -1, 1), rng.uniform(k + 7, -1, 1));
        const Vec3 g = grad_psi_ambient(spec, x, y);
        Vec3 fd;
        for (int d = 0; d < 3; ++d) {
            const Vec3 e = Vec3::Unit(d) * h;
            fd[d] = (psi(spec, (x + e - y).norm()) - psi(spec, (x - e - y).norm())) / (2 * h);
        }
        EXPECT_LE((g - fd).norm(), 1e-6 * (1 + g.norm()));
        EXPECT_LE((grad_psi_ambient(spec, y, x) + g).norm(), 1e-15 * (1 + g.norm()));
    }
}

TEST(SurfaceGradPsi, TangentAndSymmetric) {
    const auto sphere = SurfaceModel::unit_sphere();
    const KernelSpec k(3, 2.0);
    EXPECT_EQ(surface_grad_psi(k, sphere, Vec3(0, 0, 1), Vec3(0, 0, 1)), Vec3::Zero());
    EXPECT_LE(surface_grad_psi(k, sphere, Vec3(0, 0, 1), Vec3(0, 0, -1)).norm(), 1e-15);

    const CounterRng rng(9);
    for (const auto& s : {SurfaceModel::unit_sphere(), SurfaceModel::torus(), SurfaceModel::ellipsoid(),
                          SurfaceModel::dupin_cyclide()}) {
        for (std::uint64_t i = 0; i < 100; ++i) {
            const Vec3 zeta = s.parametrize(rng.uniform(4 * i, 0, 6.28), rng.uniform(4 * i + 1, 0.05, 3.0));
            const Vec3 eta = s.parametrize(rng.uniform(4 * i + 2, 0, 6.28), rng.uniform(4 * i + 3, 0.05, 3.0));
            const Vec3 g = surface_grad_psi(KernelSpec(4, 3.0), s, zeta, eta);
            EXPECT_NEAR(g.dot(s.normal(zeta)), 0.0, 1e-12);
        }
    }
}

TEST(Gram, PositiveDefiniteOnSurfacePoints) {
    const auto pts = fibonacci_sphere(200);
    for (int m = 2; m <= 6; ++m) {
        for (double eps : {8.0, 14.0}) {
            Eigen::MatrixXd g(200, 200);
            for (int i = 0; i < 200; ++i)
                for (int j = 0; j < 200; ++j) g(i, j) = psi(KernelSpec(m, eps), (pts[i] - pts[j]).norm());
            EXPECT_EQ(Eigen::LLT<Eigen::MatrixXd>(g).info(), Eigen::Success) << m << " " << eps;
        }
    }
}
