#include <cmath>
#include <filesystem>
#include <fstream>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "surfgal/integrate.hpp"

using namespace surfgal;
using fixtures::random_vector;
using fixtures::sphere_problem;
using oracles::brute_avf_step;

TEST(StepConfig, Validation) {
    StepConfig c;
    c.dt = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c.dt = 1e-3;
    c.nonlinear_tol = 1;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(StepAC, MatchesDenseBruteForce) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const auto spec = EnergySpec::interface_width(0.3);
    const double dt = 0.01;
    const Eigen::VectorXd a0 = random_vector(150, 7);
    const auto s1 = step_ac(p.ops, spec, {.dt = dt, .nonlinear_tol = 1e-13}, {a0, 0, 0});
    const Eigen::VectorXd ref = brute_avf_step(p, spec, dt, a0);
    EXPECT_LE((s1.alpha - ref).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_EQ(s1.n, 1u);
    EXPECT_DOUBLE_EQ(s1.t, dt);
}

TEST(StepAC, QuadraticEnergyAvfEqualsCrankNicolson) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const EnergySpec quad(0.05, 1.0, Potential::Quadratic);
    Stepper avf(p.ops, quad, {.dt = 0.01, .scheme = Scheme::AVF_AC, .nonlinear_tol = 1e-13});
    Stepper cn(p.ops, quad, {.dt = 0.01, .scheme = Scheme::CN_AC, .nonlinear_tol = 1e-13});
    FlowState a{random_vector(150, 9), 0, 0};
    double worst = 0;
    for (int k = 0; k < 100; ++k) {
        const auto an = avf.step(a), cnn = cn.step(a);  // same input each step
        worst = std::max(worst, (an.alpha - cnn.alpha).cwiseAbs().maxCoeff());
        a = an;
    }
    EXPECT_LE(worst, 1e-10);
}

TEST(StepAC, HeatFlowDecayFactor) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const EnergySpec heat(0.7, 0.0, Potential::Zero);
    const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(p.ops.B), Eigen::MatrixXd(p.ops.A));
    const double dt = 0.02;
    for (Eigen::Index k : {1, 5, 20}) {
        const double lam = es.eigenvalues()[k];
        const Eigen::VectorXd v = es.eigenvectors().col(k);
        const auto s = step_ac(p.ops, heat, {.dt = dt}, {v, 0, 0});
        const double factor = (1 - 0.7 * lam * dt / 2) / (1 + 0.7 * lam * dt / 2);
        EXPECT_LE((s.alpha - factor * v).cwiseAbs().maxCoeff(), 1e-8 * v.cwiseAbs().maxCoeff()) << k;
    }
}

TEST(StepAC, StabilizationLeavesSolutionUnchanged) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const auto spec = EnergySpec::interface_width(0.3);
    const FlowState s{random_vector(150, 21), 0, 0};
    const auto plain = step_ac(p.ops, spec, {.dt = 0.005, .nonlinear_tol = 1e-13, .stabilization = 0.0}, s);
    const auto shifted = step_ac(p.ops, spec, {.dt = 0.005, .nonlinear_tol = 1e-13, .stabilization = 0.5}, s);
    EXPECT_LE((plain.alpha - shifted.alpha).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(StepAC, StiffReactionConvergesWithShift) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const auto spec = EnergySpec::scaled(0.05);  // c_react = 400
    Stepper st(p.ops, spec, {.dt = 2e-3});
    const auto s = st.step({random_vector(150, 4), 0, 0});
    EXPECT_TRUE(s.alpha.allFinite());
    EXPECT_LT(st.last_iterations(), 100);
}

TEST(StepAC, ConsistencyFirstOrderIncrement) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const auto spec = EnergySpec::interface_width(0.3);
    const Eigen::VectorXd a0 = random_vector(150, 5);
    std::vector<double> inc;
    for (double dt : {1e-3, 5e-4, 2.5e-4}) inc.push_back((step_ac(p.ops, spec, {.dt = dt}, {a0, 0, 0}).alpha - a0).norm());
    EXPECT_NEAR(inc[0] / inc[1], 2.0, 0.1);
    EXPECT_NEAR(inc[1] / inc[2], 2.0, 0.1);
}

TEST(StepAC, NonConvergenceIsReported) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const auto spec = EnergySpec::scaled(0.05);
    EXPECT_THROW(step_ac(p.ops, spec, {.dt = 2e-3, .max_iter = 1, .stabilization = 0.0}, {random_vector(150, 4), 0, 0}),
                 NonlinearDivergence);
    EXPECT_THROW(step_ac(p.ops, spec, {.dt = 2e-3}, {Eigen::VectorXd::Zero(3), 0, 0}), LengthMismatch);
}

TEST(StepCH, LinearFlowDissipatesGradientEnergy) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const EnergySpec lin(0.1, 0.0, Potential::Zero);
    Stepper st(p.ops, lin, {.dt = 1e-3, .scheme = Scheme::AVF_CH});
    FlowState s{random_vector(150, 13), 0, 0};
    double prev = s.alpha.dot(p.ops.B * s.alpha);
    for (int k = 0; k < 20; ++k) {
        s = st.step(s);
        const double e = s.alpha.dot(p.ops.B * s.alpha);
        EXPECT_LT(e, prev);
        prev = e;
    }
}

TEST(StepCH, ConstantStateIsSteady) {
    const auto& p = sphere_problem(900, 5, 8.0, 6000);
    const auto spec = EnergySpec::interface_width(0.05);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(900);
    const auto s = step_ch(p.ops, spec, {.dt = 2e-4}, {one, 0, 0});
    EXPECT_LE((s.alpha - one).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(StepCH, ConservesMassApproximately) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const auto spec = EnergySpec::interface_width(0.2);
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(150);
    FlowState s{random_vector(150, 31, -0.5, 0.5), 0, 0};
    const double m0 = ones.dot(p.ops.A * s.alpha);
    Stepper st(p.ops, spec, {.dt = 1e-3, .scheme = Scheme::AVF_CH});
    for (int k = 0; k < 20; ++k) s = st.step(s);
    EXPECT_LE(std::abs(ones.dot(p.ops.A * s.alpha) - m0), 1e-2 * p.rule.total());
}

TEST(Run, ZeroStateStaysZero) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const EnergySpec spec(0.1, 0.0);
    const auto [s, trace] = run(p.ops, spec, {.dt = 0.01}, {Eigen::VectorXd::Zero(150), 0, 0}, 0.1);
    EXPECT_EQ(s.alpha.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(trace.rows.size(), 11u);
    EXPECT_EQ(s.n, 10u);
    EXPECT_DOUBLE_EQ(s.t, 0.1);
}

TEST(Run, EnergyDissipationAndTrace) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    for (Scheme scheme : {Scheme::AVF_AC, Scheme::AVF_CH}) {
        const auto spec = EnergySpec::interface_width(0.2);
        const StepConfig cfg{.dt = 2e-3, .scheme = scheme};
        int observed = 0;
        const auto [s, trace] = run(p.ops, spec, cfg, {random_vector(150, 77), 0, 0}, 0.1,
                                    {[&](const FlowState&, const EnergyRecord&) { ++observed; }});
        EXPECT_EQ(observed, 51);
        const double e0 = trace.rows.front().energy;
        EXPECT_TRUE(trace.nonincreasing(10 * cfg.nonlinear_tol * e0)) << trace.max_increase();
        for (std::size_t i = 1; i < trace.rows.size(); ++i) EXPECT_GT(trace.rows[i].t, trace.rows[i - 1].t);
    }
}

TEST(Run, RejectsNonDividingStepAndWrapsFailures) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const EnergySpec spec;
    EXPECT_THROW(run(p.ops, spec, {.dt = 0.03}, {Eigen::VectorXd::Zero(150), 0, 0}, 0.1), ConfigError);
    EXPECT_THROW(run(p.ops, EnergySpec::scaled(0.05), {.dt = 2e-3, .max_iter = 1, .stabilization = 0.0},
                     {random_vector(150, 4), 0, 0}, 4e-3),
                 StepFailure);
}

TEST(Run, ForcingAtMidpointTime) {
    const auto& p = sphere_problem(150, 3, 6.0, 2000);
    const EnergySpec spec(0.1, 0.0, Potential::Zero);
    std::vector<double> times;
    const Forcing f = [&](double t) {
        times.push_back(t);
        return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p.rule.size()));
    };
    run(p.ops, spec, {.dt = 0.1}, {Eigen::VectorXd::Zero(150), 0, 0}, 0.3, {}, f);
    ASSERT_EQ(times.size(), 3u);
    EXPECT_DOUBLE_EQ(times[0], 0.05);
    EXPECT_DOUBLE_EQ(times[2], 0.25);
}

TEST(EnergyTrace, CsvFormat) {
    EnergyTrace t;
    t.rows = {{0, 0.0, 2.0, 1.0, 0}, {1, 0.1, 1.5, 0.9, 3}};
    const auto path = std::filesystem::temp_directory_path() / "surfgal_energy.csv";
    t.save_csv(path);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    EXPECT_EQ(header, "step,t,energy,maxu,iters");
    EXPECT_EQ(row, "0,0,2,1,0");
    EXPECT_DOUBLE_EQ(t.max_increase(), -0.5);
}
