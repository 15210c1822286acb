#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "nflow/params.hpp"
#include "test_support.hpp"

namespace nflow {
namespace {

using testing_support::dense_segment;
using testing_support::random_path;

TEST(PathSupNormTest, Examples) {
  Matrix w(2, 2);
  w << 1, 2, 0, 1;
  EXPECT_EQ(path_sup_norm(ParamPath(Structure::Composition, {dense_segment(1.0, w, Vector::Zero(2))})), 3.0);
  EXPECT_EQ(path_sup_norm(ParamPath(Structure::Separation,
                                    {dense_segment(1.0, Matrix::Zero(2, 2), Vector::Zero(2), 0.0)})),
            0.0);
  ParamPath two(Structure::Separation, {dense_segment(0.5, Matrix::Constant(1, 1, 1.5), Vector::Zero(1)),
                                        dense_segment(0.5, Matrix::Zero(1, 1), Vector::Zero(1), -2.25)});
  EXPECT_EQ(path_sup_norm(two), 2.25);
}

TEST(PerturbTest, Examples) {
  const ParamPath p(Structure::Separation, {dense_segment(1.0, Matrix::Constant(1, 1, 1.0), Vector::Ones(1), 0.5)});
  const ParamPath zero(Structure::Separation,
                       {dense_segment(1.0, Matrix::Zero(1, 1), Vector::Zero(1), 0.0)});
  const ParamPath same = perturb(p, zero);
  EXPECT_EQ(std::get<Matrix>(same.segment(0).W)(0, 0), 1.0);
  EXPECT_EQ(same.segment(0).alpha, 0.5);

  const ParamPath d(Structure::Separation, {dense_segment(1.0, Matrix::Constant(1, 1, 0.1), Vector::Zero(1))});
  EXPECT_DOUBLE_EQ(std::get<Matrix>(perturb(p, d).segment(0).W)(0, 0), 1.1);

  const ParamPath two(Structure::Separation, {dense_segment(0.5, Matrix::Zero(1, 1), Vector::Zero(1)),
                                              dense_segment(0.5, Matrix::Zero(1, 1), Vector::Zero(1))});
  EXPECT_THROW(perturb(p, two), StructuralError);
}

TEST(PerturbTest, TriangleInequality) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 200; ++i) {
    const ParamPath p = random_path(rng, Structure::Separation, 3, 1.0, {0.25, 0.5, 0.25});
    const ParamPath d = random_path(rng, Structure::Separation, 3, 0.3, {0.25, 0.5, 0.25});
    ASSERT_LE(path_sup_norm(perturb(p, d)), path_sup_norm(p) + path_sup_norm(d) + 1e-14);
  }
}

TEST(TimeCorrectTest, Examples) {
  const auto seg = [](double tau) { return dense_segment(tau, Matrix::Zero(1, 1), Vector::Zero(1)); };
  auto r1 = time_correct(ParamPath(Structure::Composition, {seg(0.30), seg(0.45)}), 0.1);
  EXPECT_NEAR(r1.path.segment(0).duration, 0.3, 1e-15);
  EXPECT_NEAR(r1.path.segment(1).duration, 0.5, 1e-15);
  EXPECT_NEAR(r1.max_shift, 0.05, 1e-15);
  EXPECT_NEAR(r1.path.total_time(), 0.8, 1e-15);

  auto r2 = time_correct(ParamPath(Structure::Composition, {seg(1.0)}), 0.25);
  EXPECT_EQ(r2.path.segment(0).duration, 1.0);
  EXPECT_EQ(r2.max_shift, 0.0);

  auto r3 = time_correct(ParamPath(Structure::Composition, {seg(0.03)}), 0.1);
  EXPECT_NEAR(r3.path.segment(0).duration, 0.1, 1e-15);
  EXPECT_NEAR(r3.max_shift, 0.07, 1e-15);

  EXPECT_THROW(time_correct(ParamPath(Structure::Composition, {seg(1.0)}), 0.0), DomainError);
  EXPECT_THROW(time_correct(ParamPath(Structure::Composition, {seg(1.0)}), -0.1), DomainError);
}

TEST(TimeCorrectTest, IdempotentAndAligned) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> tau(0.001, 1.0), dtd(0.01, 0.3);
  for (int i = 0; i < 500; ++i) {
    std::vector<ParamSegment> segs;
    for (int s = 0; s < 4; ++s) segs.push_back(dense_segment(tau(rng), Matrix::Zero(2, 2), Vector::Zero(2)));
    const ParamPath p(Structure::Separation, segs);
    const double dt = dtd(rng);
    const auto once = time_correct(p, dt);
    const auto twice = time_correct(once.path, dt);
    ASSERT_LE(once.max_shift, 1.5 * dt + 1e-15);
    for (std::size_t s = 0; s < p.size(); ++s) {
      ASSERT_EQ(once.path.segment(s).duration, twice.path.segment(s).duration);
      const double r = once.path.segment(s).duration / dt;
      ASSERT_NEAR(r, std::round(r), 1e-12 * std::max(1.0, r));
    }
    ASSERT_EQ(twice.max_shift, 0.0);
    ASSERT_NO_THROW(aligned_steps(once.path, dt));
  }
}

TEST(AlignedStepsTest, RejectsUnaligned) {
  const ParamPath p(Structure::Composition, {dense_segment(0.35, Matrix::Zero(1, 1), Vector::Zero(1))});
  EXPECT_THROW(aligned_steps(p, 0.1), AlignmentError);
  EXPECT_EQ(aligned_steps(p, 0.05), std::vector<long>{7});
}

TEST(ParamPathTest, Validation) {
  EXPECT_THROW(ParamPath(Structure::Composition, {}), StructuralError);
  EXPECT_THROW(ParamPath(Structure::Composition, {dense_segment(0.0, Matrix::Zero(1, 1), Vector::Zero(1))}),
               StructuralError);
  EXPECT_THROW(ParamPath(Structure::Composition, {dense_segment(1.0, Matrix::Zero(2, 1), Vector::Zero(2))}),
               StructuralError);
  EXPECT_THROW(ParamPath(Structure::Composition, {dense_segment(1.0, Matrix::Zero(2, 2), Vector::Zero(3))}),
               StructuralError);
  // Composition segments drop alpha.
  const ParamPath c(Structure::Composition, {dense_segment(1.0, Matrix::Zero(1, 1), Vector::Zero(1), 0.7)});
  EXPECT_EQ(c.segment(0).alpha, 0.0);
  // Field biases need the opt-in flag.
  ParamSegment fb = dense_segment(1.0, Matrix::Zero(1, 1), Vector::Zero(1));
  fb.b = Matrix::Zero(1, 8);
  EXPECT_THROW(ParamPath(Structure::Separation, {fb}), StructuralError);
  EXPECT_NO_THROW(ParamPath(Structure::Separation, {fb}, true));
}

TEST(PathDistanceTest, UsesCommonRefinement) {
  const ParamPath p1(Structure::Separation, {dense_segment(1.0, Matrix::Constant(1, 1, 1.0), Vector::Zero(1))});
  const ParamPath p2(Structure::Separation, {dense_segment(0.5, Matrix::Constant(1, 1, 1.0), Vector::Zero(1)),
                                             dense_segment(0.5, Matrix::Constant(1, 1, 1.5), Vector::Zero(1))});
  EXPECT_DOUBLE_EQ(path_distance(p1, p2), 0.5);
  EXPECT_EQ(path_distance(p1, p1), 0.0);
}

TEST(SplitPathTest, SplitsInsideASegment) {
  const ParamPath p(Structure::Separation, {dense_segment(0.6, Matrix::Zero(1, 1), Vector::Zero(1)),
                                            dense_segment(0.4, Matrix::Ones(1, 1), Vector::Zero(1))});
  auto [first, second] = split_path(p, 0.5);
  EXPECT_EQ(first.size(), 1u);
  EXPECT_EQ(second.size(), 2u);
  EXPECT_NEAR(second.segment(0).duration, 0.1, 1e-15);
  EXPECT_THROW(split_path(p, 1.0), DomainError);
}

}  // namespace
}  // namespace nflow
