#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "nflow/convops.hpp"
#include "nflow/flow.hpp"
#include "test_support.hpp"

namespace nflow {
namespace {

using testing_support::dense_segment;
using testing_support::random_path;
using testing_support::random_vector;

Matrix mat1(double v) { return Matrix::Constant(1, 1, v); }
Vector vec1(double v) { return Vector::Constant(1, v); }

/// Closed-form RK4 amplification for z' = w z over one step of size h.
double rk4_factor(double wh) { return 1.0 + wh + wh * wh / 2.0 + wh * wh * wh / 6.0 + wh * wh * wh * wh / 24.0; }

TEST(RhsTest, Examples) {
  const ActivationFamily relu{0.0};
  EXPECT_EQ(rhs(mat1(5.0), dense_segment(1, mat1(0), vec1(1)), Structure::Separation, relu)(0, 0), 1.0);
  EXPECT_EQ(rhs(mat1(-2.0), dense_segment(1, mat1(1), vec1(0)), Structure::Composition, relu)(0, 0), 0.0);
  EXPECT_EQ(rhs(mat1(-1.0), dense_segment(1, mat1(2), vec1(0), 1.0), Structure::Separation, ActivationFamily{0.5})(0, 0),
            -2.5);
}

TEST(IntegrateTest, LinearSeparationMatchesRk4ClosedForm) {
  const ParamPath p(Structure::Separation, {dense_segment(1.0, mat1(1), vec1(0))});
  const FlowProblem fp(p, LatentState::scalars(vec1(1.0)), ActivationFamily{0.0});
  const double z64 = integrate_reference(fp, 64).values()(0, 0);
  // The classical RK4 iterate is (1 + h + h^2/2 + h^3/6 + h^4/24)^N exactly.
  EXPECT_NEAR(z64, std::pow(rk4_factor(1.0 / 64), 64), 1e-13);
  EXPECT_NEAR(z64, std::exp(1.0), 2e-9);
  EXPECT_NEAR(integrate_reference(fp, 128).values()(0, 0), std::exp(1.0), 1e-9);
}

TEST(IntegrateTest, CompositionIdentityActivation) {
  const ParamPath p(Structure::Composition, {dense_segment(1.0, mat1(1), vec1(0))});
  const FlowProblem fp(p, LatentState::scalars(vec1(1.0)), ActivationFamily{1.0});
  EXPECT_NEAR(integrate_reference(fp, 128).values()(0, 0), std::exp(1.0), 1e-9);
}

TEST(IntegrateTest, ZeroPathIsStationary) {
  std::mt19937_64 rng(1);
  const ParamPath p(Structure::Separation, {dense_segment(0.7, Matrix::Zero(3, 3), Vector::Zero(3)),
                                            dense_segment(0.3, Matrix::Zero(3, 3), Vector::Zero(3))});
  const Vector z0 = random_vector(rng, 3, 5.0);
  const auto z = integrate_reference(FlowProblem(p, LatentState::scalars(z0), ActivationFamily{0.2}), 7);
  EXPECT_EQ(z.values().col(0), z0);
}

TEST(IntegrateTest, RejectsZeroSubsteps) {
  const ParamPath p(Structure::Separation, {dense_segment(1.0, mat1(1), vec1(0))});
  EXPECT_THROW(integrate_reference(FlowProblem(p, LatentState::scalars(vec1(1)), ActivationFamily{0}), 0),
               DomainError);
}

TEST(IntegrateTest, DivergenceCarriesSegment) {
  const ParamPath p(Structure::Separation,
                    {dense_segment(0.1, mat1(0), vec1(0)), dense_segment(50.0, mat1(1e80), vec1(0))});
  try {
    integrate_reference(FlowProblem(p, LatentState::scalars(vec1(1)), ActivationFamily{0}), 4);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.segment(), 1u);
  }
}

TEST(IntegrateTest, ObserverSeesEverySubstep) {
  const ParamPath p(Structure::Separation, {dense_segment(0.5, mat1(0), vec1(1)), dense_segment(0.25, mat1(0), vec1(1))});
  std::vector<std::size_t> segs;
  double last_t = 0;
  integrate_reference(FlowProblem(p, LatentState::scalars(vec1(0)), ActivationFamily{0}), 5,
                      [&](double t, std::size_t s, const Matrix&) {
                        segs.push_back(s);
                        last_t = t;
                      });
  EXPECT_EQ(segs.size(), 10u);
  EXPECT_EQ(segs.front(), 0u);
  EXPECT_EQ(segs.back(), 1u);
  EXPECT_DOUBLE_EQ(last_t, 0.75);
}

TEST(IntegrateTest, FourthOrderOnSmoothProblems) {
  std::mt19937_64 rng(5);
  for (int c = 0; c < 20; ++c) {
    const Structure st = c % 2 ? Structure::Separation : Structure::Composition;
    // Slope 1 removes the kink, so trajectories are smooth.
    const ActivationFamily id{1.0};
    const ParamPath p = random_path(rng, st, 3, 1.0, {0.4, 0.6});
    const auto z0 = LatentState::scalars(random_vector(rng, 3));
    const auto at = [&](int n) { return integrate_reference(FlowProblem(p, z0, id), n).values(); };
    const Matrix z8 = at(8), z16 = at(16), z32 = at(32);
    const double order = std::log2((z8 - z16).cwiseAbs().maxCoeff() / (z16 - z32).cwiseAbs().maxCoeff());
    EXPECT_GE(order, 3.5) << "case " << c;
  }
}

TEST(LipschitzTest, Examples) {
  Matrix w3(1, 2);
  w3 << 1, -2;
  Matrix w3sq = Matrix::Zero(2, 2);
  w3sq.row(0) = w3;
  EXPECT_EQ(lipschitz_state(dense_segment(1, w3sq, Vector::Zero(2)), Structure::Composition, ActivationFamily{2.0}), 6.0);
  EXPECT_EQ(lipschitz_state(dense_segment(1, mat1(1), vec1(0), 0.5), Structure::Separation, ActivationFamily{0.0}), 1.5);
  EXPECT_EQ(lipschitz_state(dense_segment(1, mat1(0), vec1(0)), Structure::Composition, ActivationFamily{3.0}), 0.0);
  EXPECT_EQ(lipschitz_state(dense_segment(1, mat1(0), vec1(0), -0.5), Structure::Separation, ActivationFamily{-3.0}),
            1.5);
}

TEST(GronwallTest, Examples) {
  const ParamPath p1(Structure::Composition, {dense_segment(1.0, mat1(1.0), vec1(0))});
  const ParamPath p2(Structure::Composition, {dense_segment(1.0, mat1(1.1), vec1(0))});
  const ActivationFamily relu{0.0};
  EXPECT_EQ(gronwall_bound(p1, p1, 1.0, relu).bound, 0.0);
  const StabilityBound b = gronwall_bound(p1, p2, 1.0, relu);
  EXPECT_DOUBLE_EQ(b.lipschitz_L, 1.0);
  EXPECT_DOUBLE_EQ(b.param_M, 2.0);
  EXPECT_NEAR(b.param_distance, 0.1, 1e-15);
  EXPECT_NEAR(b.bound, 2.0 * std::exp(1.0) * 0.1, 1e-15);
  EXPECT_NEAR(b.bound, 0.5437, 1e-4);
  const ParamPath p3(Structure::Composition, {dense_segment(1.0, mat1(1.2), vec1(0))});
  EXPECT_NEAR(gronwall_bound(p1, p3, 1.0, relu).bound, 2.0 * b.bound, 1e-14);
}

TEST(GronwallTest, HoldsOnRandomPerturbations) {
  verify::Rng rng(21);
  const auto r = verify::check_gronwall(rng, 100);
  EXPECT_TRUE(r.passed) << r.measured;
}

TEST(SemigroupTest, SplitAtMidpoint) {
  verify::Rng rng(22);
  const auto r = verify::check_semigroup(rng, 10);
  EXPECT_LE(r.measured, 1e-9);
}

TEST(FlowTest, ConstantFieldsStayConstant) {
  std::mt19937_64 rng(23);
  const ChannelKind grid = ChannelKind::grid(8, 1);
  std::vector<ParamSegment> segs;
  for (double tau : {0.3, 0.5}) {
    segs.push_back(ParamSegment{tau, ConvKernel::constant(grid, testing_support::random_matrix(rng, 2, 2)),
                                testing_support::random_matrix(rng, 2, 1), 0.4});
  }
  const ParamPath p(Structure::Separation, segs);
  const auto z0 = LatentState::constant_fields(grid, random_vector(rng, 2));
  const auto z = integrate_reference(FlowProblem(p, z0, ActivationFamily{0.1}), 32);
  EXPECT_TRUE(is_constant_fields(z));
}

TEST(FlowProblemTest, ChannelMismatch) {
  const ParamPath p(Structure::Separation, {dense_segment(1.0, mat1(1), vec1(0))});
  EXPECT_THROW(FlowProblem(p, LatentState::scalars(Vector::Zero(2)), ActivationFamily{0}), StructuralError);
}

}  // namespace
}  // namespace nflow
