#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "surfgal/bench.hpp"

using namespace surfgal;

namespace {

QuadratureRule toy_rule(std::size_t n) {
    QuadratureRule r;
    for (std::size_t i = 0; i < n; ++i) {
        r.nodes.points.push_back(Vec3::UnitZ());
        r.weights.push_back(1.0 + 0.1 * static_cast<double>(i));
    }
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig small_separation(const std::filesystem::path& out) {
    auto c = default_config("separate");
    c.nx = 150, c.ny = 2000, c.degree = 6, c.k2 = 7, c.dt = 2e-3, c.T = 0.02, c.snapshots = {0.0, 0.02};
    c.out = out;
    return c;
}

}  // namespace

TEST(RelativeL2, Cases) {
    const auto rule = toy_rule(5);
    const Eigen::VectorXd u = Eigen::VectorXd::LinSpaced(5, 1, 3);
    EXPECT_EQ(relative_l2_error(rule, u, u), 0.0);
    EXPECT_NEAR(relative_l2_error(rule, u, 2 * u), 1.0, 1e-15);
    EXPECT_THROW(relative_l2_error(rule, Eigen::VectorXd::Zero(5), u), ZeroDenominator);
    EXPECT_THROW(relative_l2_error(rule, u, Eigen::VectorXd::Zero(4)), LengthMismatch);
}

TEST(ErrorReport, RecoversExactRates) {
    for (double p : {1.0, 2.0, 4.5, 9.25}) {
        ErrorReport r;
        r.parameter = "N_X";
        for (double h : {0.1, 0.07, 0.05, 0.031}) r.add(1 / (h * h), h, 3.7 * std::pow(h, p), 0);
        for (std::size_t i = 1; i < r.rows.size(); ++i) EXPECT_NEAR(r.rows[i].rate, p, 1e-12);
        EXPECT_NEAR(r.fitted_rate(), p, 1e-12);
        EXPECT_TRUE(r.strictly_decreasing());
    }
    ErrorReport halving;
    halving.parameter = "dt";
    for (double dt : {0.04, 0.02, 0.01}) halving.add(dt, dt, dt * dt, 0);
    EXPECT_NEAR(halving.rows[2].rate, 2.0, 1e-12);
}

TEST(ErrorReport, SingleRowHasEmptyRate) {
    ErrorReport r;
    r.parameter = "dt";
    r.add(0.01, 0.01, 1e-4, 0.5);
    EXPECT_TRUE(std::isnan(r.rows[0].rate));
    EXPECT_TRUE(std::isnan(r.fitted_rate()));
    const auto path = std::filesystem::temp_directory_path() / "surfgal_single.csv";
    r.save_csv(path);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_EQ(header, "dt,h,error,rate,seconds");
    EXPECT_NE(row.find(",,"), std::string::npos);
    EXPECT_TRUE(r.to_json()["rows"][0]["rate"].is_null());
}

TEST(ErrorReport, FlagsNonDecreasing) {
    ErrorReport r;
    r.parameter = "N_Y";
    r.add(1, 1, 1e-3, 0);
    r.add(2, 0.5, 1e-3, 0);
    EXPECT_FALSE(r.strictly_decreasing());
}

TEST(Config, Validation) {
    auto c = default_config("curvature");
    EXPECT_NO_THROW(c.validate());
    c.dt = 3e-4;
    EXPECT_THROW(c.validate(), ConfigError);  // does not divide 0.35
    c = default_config("solve");
    c.nodes_file = "/nonexistent/nodes.txt";
    EXPECT_THROW(c.validate(), ConfigError);
    c = default_config("solve");
    c.surface = "klein";
    EXPECT_THROW(c.validate(), ConfigError);
    c = default_config("solve");
    c.m = 9;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_THROW(default_config("plot"), ConfigError);
    c = default_config("converge");
    c.sweep = "dt";
    c.T = 1.0;
    EXPECT_NO_THROW(c.validate());
    c.T = 0.9;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, DefaultsStayWithinDesktopCaps) {
    for (const char* e : {"basis", "quad", "solve", "converge", "stencil", "curvature", "separate"}) {
        const auto c = default_config(e);
        EXPECT_LE(c.nx, 1024u) << e;
        EXPECT_LE(c.ny, 10001u) << e;
        for (auto n : c.nx_list) EXPECT_LE(n, 1024u);
        for (auto n : c.ny_list) EXPECT_LE(n, 10001u);
    }
    EXPECT_EQ(default_config("converge", true).nx_list.back(), 3136u);
    for (auto [k2, n] : {std::pair<std::size_t, std::size_t>{1, 13}, {2, 26}, {3, 39}, {5, 65}, {7, 91}, {11, 143}})
        EXPECT_EQ(stencil_size(3136, k2), n);
}

TEST(Curvature, RadiusLaw) {
    const double r0 = 1 / std::numbers::sqrt2;
    EXPECT_DOUBLE_EQ(curvature_radius_law(r0, 0), r0);
    EXPECT_NEAR(curvature_radius_law(r0, 0.3), std::sqrt(1 - 0.5 * std::exp(0.6)), 1e-15);
    EXPECT_EQ(curvature_radius_law(r0, 0.35), 0.0);  // collapse at t = ln 2 / 2
}

TEST(Curvature, CapRadiusOfSmoothField) {
    const auto s = SurfaceModel::unit_sphere();
    const auto basis = build_full_basis(generate_nodes(s, 900, NodeMethod::Fibonacci), KernelSpec(5, 8.0));
    for (double rho : {0.4, 0.8}) {
        Eigen::VectorXd a(900);
        for (Eigen::Index i = 0; i < 900; ++i) a[i] = basis.centers.points[static_cast<std::size_t>(i)][2] - std::cos(rho);
        EXPECT_NEAR(cap_radius(basis, a, 36), std::sin(rho), 1e-5);
    }
    EXPECT_EQ(cap_radius(basis, -Eigen::VectorXd::Ones(900), 4), 0.0);
}

TEST(PhaseField, ConcentricCircles) {
    EXPECT_NEAR(concentric_circles(Vec3(0, 0, 1), 0.05), -1.0, 1e-4);
    EXPECT_NEAR(concentric_circles(Vec3(0, 0, -1), 0.05), -1.0, 1e-6);
    EXPECT_NEAR(concentric_circles(Vec3(std::sin(0.67), 0, std::cos(0.67)), 0.05), 1.0, 5e-3);
}

TEST(PhaseField, DeterministicWithValidSnapshots) {
    const auto base = std::filesystem::temp_directory_path() / "surfgal_sep";
    std::filesystem::remove_all(base);
    const auto a = run_phase_separation(small_separation(base / "a"));
    const auto b = run_phase_separation(small_separation(base / "b"));
    EXPECT_TRUE(a.passed());
    EXPECT_EQ(slurp(base / "a" / "energy.csv"), slurp(base / "b" / "energy.csv"));
    const auto f = load_field(base / "a" / "u_000010.vtk");
    EXPECT_EQ(f.values.size(), f.mesh.num_vertices());
    EXPECT_GT(f.mesh.triangles.size(), 0u);
    a.save(base / "a");
    const auto j = nlohmann::json::parse(slurp(base / "a" / "report.json"));
    EXPECT_EQ(j["experiment"], "separate");
    EXPECT_TRUE(j["passed"].get<bool>());
    EXPECT_EQ(j["data"]["snapshots"].size(), 2u);
}

TEST(PhaseField, CrankNicolsonFoilReportsWithoutAsserting) {
    const auto base = std::filesystem::temp_directory_path() / "surfgal_cn";
    auto c = small_separation(base);
    c.scheme = "cn_ac";
    const auto r = run_phase_separation(c);
    EXPECT_TRUE(r.checks.empty());
    EXPECT_TRUE(r.data.contains("cn_max_energy_increase"));
}

TEST(Sourced, SmallSolveConverges) {
    const auto s = SurfaceModel::unit_sphere();
    const auto basis = build_full_basis(generate_nodes(s, 200, NodeMethod::Fibonacci), KernelSpec(5, 5.0));
    const auto ops = assemble(basis, compute_weights(make_mesh(s, 3000), s, {.degree = 6}), s);
    const auto r = solve_sourced(s, ops, 1e-3, 1e-2);
    EXPECT_LT(r.error, 1e-2);
    EXPECT_THROW(manufactured_for(SurfaceModel::ellipsoid()), ConfigError);
}
