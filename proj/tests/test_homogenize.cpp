#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "kppflow/homogenize.hpp"

using namespace kppflow;
namespace {

constexpr double pi = std::numbers::pi;

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

const FlowField& shear64() {
    static const FlowField f = build_flow(flows::Shear{}, TorusGrid::unit(2, 64));
    return f;
}

const FlowField& cellular64() {
    static const FlowField f = build_flow(flows::Cellular2D{}, TorusGrid::unit(2, 64));
    return f;
}

TEST(CellProblem, ZeroAmplitudeShortCircuits) {
    const auto s = solve_cell_problem(cellular64(), 0.0, {1.0, 0.0});
    EXPECT_EQ(s.iterations, 0);
    EXPECT_TRUE(s.converged);
    for (double v : s.chi.values())
        EXPECT_EQ(v, 0.0);
    const auto d = diffusivity(cellular64(), 0.0, {1.0, 0.0});
    EXPECT_TRUE(d.sigma.isApprox(Eigen::MatrixXd::Identity(2, 2)));
    EXPECT_DOUBLE_EQ(d.D_e, 1.0);
}

TEST(CellProblem, ShearCorrectorIsOneDimensionalPoissonSolution) {
    for (double A : {1.0, 10.0, 100.0}) {
        const auto s = solve_cell_problem(shear64(), A, {1.0, 0.0});
        ASSERT_TRUE(s.converged);
        auto rhs = shear64().u()[0];
        rhs *= A;
        const auto oracle = solve_poisson(rhs);
        const auto closed =
            ScalarField::sample(shear64().grid(), [A](auto x) { return A * std::sin(2 * pi * x[1]) / (4 * pi * pi); });
        EXPECT_LT(max_abs_diff(s.chi, oracle), 1e-10 * A);
        EXPECT_LT(max_abs_diff(oracle, closed), 1e-14 * A);
    }
}

TEST(CellProblem, ShearCrossDirectionHasZeroCorrector) {
    const auto s = solve_cell_problem(shear64(), 7.0, {0.0, 1.0});
    for (double v : s.chi.values())
        EXPECT_EQ(v, 0.0);
    const auto d = directional_diffusivity(shear64(), 7.0, {0.0, 1.0});
    EXPECT_DOUBLE_EQ(d.D_e, 1.0);
}

TEST(CellProblem, ResidualAndMeanMeetInvariants) {
    for (double tol : {1e-6, 1e-10}) {
        const auto s = solve_cell_problem(cellular64(), 16.0, {1.0, 0.0}, {tol});
        ASSERT_TRUE(s.converged);
        EXPECT_LE(s.residual, tol);
        EXPECT_LE(std::abs(mean(s.chi)), 1e-10);
        // recompute the residual independently with the torus kernel
        const auto& u = cellular64().u();
        auto r = laplacian(s.chi);
        r *= -1.0;
        auto a = advect(u, s.chi);
        a *= 16.0;
        r += a;
        auto b = u[0];
        b *= 16.0;
        r -= b;
        EXPECT_LE(std::sqrt(reduce(r, ReduceKind::L2SqMean) / reduce(b, ReduceKind::L2SqMean)), 1.01 * tol);
    }
}

TEST(CellProblem, RejectsToleranceOutsideRange) {
    EXPECT_THROW(solve_cell_problem(cellular64(), 1.0, {1.0, 0.0}, {1e-3}), InputError);
    EXPECT_THROW(solve_cell_problem(cellular64(), 1.0, {1.0, 0.0}, {1e-13}), InputError);
    EXPECT_THROW(solve_cell_problem(cellular64(), 1.0, {0.0, 0.0}), InputError);
    EXPECT_THROW(solve_cell_problem(cellular64(), 1.0, {1.0, 0.0, 0.0}), InputError);
}

TEST(CellProblem, IterationCapFlagsNonConvergence) {
    CellOptions opt;
    opt.max_iterations = 3;
    const auto s = solve_cell_problem(cellular64(), 64.0, {1.0, 0.0}, opt);
    EXPECT_FALSE(s.converged);
    EXPECT_EQ(s.iterations, 3);
    EXPECT_GT(s.residual, opt.tol);
}

TEST(CellProblem, WarmStartReachesSameCorrector) {
    const auto cold = solve_cell_problem(cellular64(), 128.0, {1.0, 0.0});
    const auto prev = solve_cell_problem(cellular64(), 64.0, {1.0, 0.0});
    const auto warm = solve_cell_problem(cellular64(), 128.0, {1.0, 0.0}, {}, &prev.chi);
    ASSERT_TRUE(cold.converged && warm.converged);
    EXPECT_LT(max_abs_diff(cold.chi, warm.chi), 1e-7);
}

TEST(Diffusivity, ShearClosedForm) {
    for (double A : {1.0, 10.0, 100.0}) {
        const auto d = diffusivity(shear64(), A, {1.0, 0.0});
        const double expect = 1.0 + A * A / (8 * pi * pi);
        EXPECT_LE(std::abs(d.D_e - expect) / d.D_e, 1e-9) << A;
        EXPECT_NEAR(d.sigma(1, 1), 1.0, 1e-14);
        EXPECT_NEAR(d.sigma(0, 1), 0.0, 1e-12);
    }
    // independent midpoint quadrature of the corrector gradient A cos(2 pi y)/(2 pi)
    const int M = 1000;
    double q = 0.0;
    for (int j = 0; j < M; ++j) {
        const double c = 10.0 * std::cos(2 * pi * (j + 0.5) / M) / (2 * pi);
        q += c * c;
    }
    EXPECT_NEAR(directional_diffusivity(shear64(), 10.0, {1.0, 0.0}).D_e, 1.0 + q / M, 1e-9);
    EXPECT_NEAR(1.0 + q / M, 2.2665, 1e-4);
}

TEST(Diffusivity, CellularIncreasesWithAmplitude) {
    double prev = 1.0;
    for (double A : {4.0, 16.0, 64.0}) {
        const auto d = directional_diffusivity(cellular64(), A, {1.0, 0.0});
        EXPECT_GT(d.D_e, prev);
        prev = d.D_e;
    }
}

TEST(Diffusivity, MatrixInvariants) {
    const auto flow = build_flow(flows::Checkerboard{2.0}, TorusGrid::unit(2, 32));
    const std::vector<double> e{0.6, 0.8};
    const auto d = diffusivity(flow, 12.0, e);
    ASSERT_TRUE(d.converged);
    EXPECT_TRUE(d.cell_e.has_value());
    EXPECT_LE((d.sigma - d.sigma.transpose()).norm(), 1e-8 * d.sigma.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.sigma);
    EXPECT_GE(es.eigenvalues().minCoeff(), 1.0 - 1e-8);
    EXPECT_LE(d.crosscheck, 1e-8);
    EXPECT_GE(d.D_e, 1.0);
    const auto neg = diffusivity(flow, 12.0, {-0.6, -0.8});
    EXPECT_NEAR(neg.D_e, d.D_e, 1e-10 * d.D_e);
}

TEST(Diffusivity, EnergyIdentityOracle) {
    // testing chi against the cell equation gives mean|grad chi|^2 = A mean(u.e chi)
    const double A = 20.0;
    const auto d = directional_diffusivity(cellular64(), A, {1.0, 0.0});
    double s = 0.0;
    for (std::size_t i = 0; i < d.cell.chi.size(); ++i)
        s += cellular64().u()[0][i] * d.cell.chi[i];
    s *= A / static_cast<double>(d.cell.chi.size());
    EXPECT_NEAR(d.D_e - 1.0, s, 1e-8 * d.D_e);
    EXPECT_NEAR(d.D_e, d.D_e_energy, 1e-10 * d.D_e);
}

TEST(Diffusivity, ThreeDimensionalCubicCells) {
    const auto flow = build_flow(flows::Cellular3D::cubic(), 3, 16);
    const auto d = diffusivity(flow, 4.0, {1.0, 0.0, 0.0});
    ASSERT_TRUE(d.converged);
    EXPECT_GT(d.D_e, 1.0);
    EXPECT_LE(d.crosscheck, 1e-8);
    // the cubic flow is symmetric under x1 <-> x2
    EXPECT_NEAR(d.sigma(0, 0), d.sigma(1, 1), 1e-8 * d.D_e);
}

TEST(Diffusivity, SweepWarmStartsAboveHundred) {
    const auto sw = diffusivity_sweep(cellular64(), {64.0, 128.0, 256.0}, {1.0, 0.0});
    ASSERT_EQ(sw.size(), 3u);
    EXPECT_LT(sw[0].D_e, sw[1].D_e);
    EXPECT_LT(sw[1].D_e, sw[2].D_e);
    const auto cold = directional_diffusivity(cellular64(), 256.0, {1.0, 0.0});
    EXPECT_NEAR(cold.D_e, sw[2].D_e, 1e-7 * cold.D_e);
}

}  // namespace
