#pragma once

#include <map>
#include <memory>
#include <tuple>

#include "surfgal/basis.hpp"
#include "surfgal/galerkin.hpp"
#include "surfgal/mesh.hpp"
#include "surfgal/quadrature.hpp"
#include "surfgal/rng.hpp"

namespace fixtures {

using namespace surfgal;

struct Problem {
    SurfaceModel surface = SurfaceModel::unit_sphere();
    LagrangeBasis basis;
    QuadratureRule rule;
    GalerkinOperators ops;
};

/// Sphere problem with a full basis; cached per parameter set within a test binary.
inline const Problem& sphere_problem(std::size_t nx, int m, double eps, std::size_t ny, int degree = 6) {
    static std::map<std::tuple<std::size_t, int, double, std::size_t, int>, std::unique_ptr<Problem>> cache;
    auto& slot = cache[{nx, m, eps, ny, degree}];
    if (!slot) {
        slot = std::make_unique<Problem>();
        auto& p = *slot;
        p.basis = build_full_basis(generate_nodes(p.surface, nx, NodeMethod::Fibonacci), KernelSpec(m, eps));
        p.rule = compute_weights(make_mesh(p.surface, ny), p.surface, {.degree = degree});
        p.ops = assemble(p.basis, p.rule, p.surface);
    }
    return *slot;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed, double lo = -1, double hi = 1) {
    const CounterRng rng(seed);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.uniform(static_cast<std::uint64_t>(i), lo, hi);
    return v;
}

}  // namespace fixtures
