#include <cmath>
#include <cstring>
#include <random>

#include "gtest/gtest.h"
#include "gradient_check.hpp"
#include "nflow/dataset.hpp"
#include "nflow/discretize.hpp"
#include "nflow/train.hpp"

namespace nflow {
namespace {

Matrix line(int count) {
  Matrix x(1, count);
  for (int i = 0; i < count; ++i) x(0, i) = -1.0 + 2.0 * i / (count - 1);
  return x;
}

TEST(AlphaWindowTest, Bounds) {
  const auto [lo, hi] = alpha_window(0.1, 0.0);
  EXPECT_DOUBLE_EQ(hi, 9.5);
  EXPECT_TRUE(std::isinf(lo));
  const auto [lo2, hi2] = alpha_window(0.5, -0.5);
  EXPECT_DOUBLE_EQ(hi2, 1.9);
  EXPECT_DOUBLE_EQ(lo2, -3.8);
}

TEST(FlattenTest, RoundTrip) {
  FitTemplate t;
  t.channels = 3;
  t.input_dim = 2;
  t.output_dim = 2;
  t.segments = 2;
  t.alpha_init = 0.3;
  const TrainableModel m = initialize_model(t, 4);
  const Vector x = flatten(m, true);
  EXPECT_EQ(x.size(), 2 * (9 + 3 + 1) + 6 + 6);
  EXPECT_EQ(flatten(unflatten(m, x, true), true), x);
  EXPECT_EQ(flatten(m, false).size(), x.size() - 2);
  EXPECT_THROW(unflatten(m, Vector::Zero(3), true), StructuralError);
}

TEST(GradientTest, MatchesCentralDifferences) {
  std::mt19937_64 rng(5);
  for (int c = 0; c < 30; ++c) {
    const auto gc = testing_support::random_gradient_case(rng);
    EXPECT_LE(testing_support::gradient_relative_error(gc), 1e-4) << "case " << c;
  }
}

TEST(GradientTest, KinkUsesPositiveSlope) {
  // One residual layer z + dt relu(w z + b) evaluated exactly at the kink.
  FitTemplate t;
  t.structure = Structure::Composition;
  t.channels = 1;
  t.dt = 0.5;
  TrainableModel m = initialize_model(t, 1);
  m.lift = Matrix::Ones(1, 1);
  m.readout = Matrix::Ones(1, 1);
  std::vector<ParamSegment> segs{ParamSegment{0.5, Matrix::Ones(1, 1), Matrix::Zero(1, 1), 0.0}};
  m.path = ParamPath(Structure::Composition, segs);
  const Matrix x = Matrix::Zero(1, 1), y = Matrix::Constant(1, 1, -1.0);
  const LossGradient lg = loss_and_gradient(m, false, x, y);
  EXPECT_EQ(lg.loss, 1.0);
  // dL/db = 2 (out - y) * dt * slope with slope 1 at the kink.
  EXPECT_DOUBLE_EQ(lg.gradient(1), 2.0 * 1.0 * 0.5 * 1.0);
}

TEST(FitTest, LinearTargetIsExact) {
  FitTemplate t;
  t.structure = Structure::Separation;
  t.channels = 1;
  t.segments = 1;
  t.steps_per_segment = 2;
  t.train_alpha = false;
  t.alpha_init = 0.0;
  FitTask task;
  task.inputs = line(21);
  task.targets = 2.0 * task.inputs;
  task.optimizer.iterations = 300;
  task.optimizer.learning_rate = 0.05;
  task.optimizer.final_learning_rate = 1e-3;
  task.optimizer.lbfgs_iterations = 200;
  task.seed = 3;
  const FitResult r = fit(task, t);
  EXPECT_LE(r.best_loss, 1e-10);
  EXPECT_LE((forward(r.network, task.inputs) - task.targets).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(FitTest, DeterministicInSeed) {
  FitTemplate t;
  t.channels = 3;
  t.segments = 2;
  t.steps_per_segment = 2;
  FitTask task;
  task.inputs = line(11);
  task.targets = task.inputs.array().abs().matrix();
  task.optimizer.iterations = 40;
  task.optimizer.lbfgs_iterations = 10;
  task.seed = 17;
  const FitResult a = fit(task, t), b = fit(task, t);
  ASSERT_EQ(a.loss_curve.size(), b.loss_curve.size());
  EXPECT_EQ(std::memcmp(a.loss_curve.data(), b.loss_curve.data(), sizeof(double) * a.loss_curve.size()), 0);
  task.seed = 18;
  EXPECT_NE(fit(task, t).loss_curve.back(), a.loss_curve.back());
}

TEST(FitTest, CompileTrainConsistency) {
  FitTemplate t;
  t.channels = 2;
  t.segments = 2;
  t.steps_per_segment = 3;
  t.slope_a = 0.2;
  t.alpha_init = 0.5;
  FitTask task;
  task.inputs = line(9);
  task.targets = task.inputs.array().sin().matrix();
  task.optimizer.iterations = 30;
  const FitResult r = fit(task, t);
  const Network again = compile(r.model.path, r.model.dt, r.model.activation)
                            .with_lift_readout(r.model.lift, r.model.readout);
  EXPECT_EQ(save(again), save(r.network));
}

TEST(FitTest, AlphaStaysInWindow) {
  FitTemplate t;
  t.channels = 2;
  t.dt = 0.5;
  t.slope_a = -0.5;
  t.alpha_init = 50.0;
  FitTask task;
  task.inputs = line(5);
  task.targets = task.inputs;
  task.optimizer.iterations = 10;
  task.optimizer.learning_rate = 1.0;
  const FitResult r = fit(task, t);
  const auto [lo, hi] = alpha_window(0.5, -0.5);
  for (const auto& s : r.model.path.segments()) {
    EXPECT_GE(s.alpha, lo);
    EXPECT_LE(s.alpha, hi);
  }
}

TEST(FitTest, Errors) {
  FitTemplate t;
  FitTask task;
  task.inputs = Matrix(1, 0);
  task.targets = Matrix(1, 0);
  EXPECT_THROW(fit(task, t), StructuralError);
  task.inputs = line(4);
  task.targets = Matrix::Zero(2, 4);
  EXPECT_THROW(fit(task, t), StructuralError);
  task.targets = Matrix::Constant(1, 4, 1e300);
  task.optimizer.iterations = 5;
  EXPECT_THROW(fit(task, t), NumericError);
}

TEST(FitOperatorTest, IdentityOperator) {
  const BasisFrame frame = BasisFrame::fourier(32, 5, 5);
  const FunctionDataset train = fourier_dataset(OperatorKind::Identity, 32, 2, 20, 1);
  const FunctionDataset held = fourier_dataset(OperatorKind::Identity, 32, 2, 10, 2);
  OperatorTask task{train.inputs, train.outputs, held.inputs, held.outputs, {}, 0};
  task.optimizer.iterations = 200;
  task.optimizer.learning_rate = 0.02;
  task.optimizer.lbfgs_iterations = 300;
  FitTemplate t;
  t.structure = Structure::Separation;
  t.channels = 5;
  t.train_alpha = false;
  t.input_dim = 5;
  t.output_dim = 5;
  const OperatorFitResult r = fit_operator(task, frame, t);
  EXPECT_LE(r.metrics.heldout_relative_l2, 1e-8);
  EXPECT_LE(r.metrics.truncation_relative_l2, 1e-14);
}

TEST(FitOperatorTest, EmptyTrainingSet) {
  const BasisFrame frame = BasisFrame::fourier(16, 3, 3);
  OperatorTask task{Matrix(16, 0), Matrix(16, 0), Matrix(16, 0), Matrix(16, 0), {}, 0};
  FitTemplate t;
  t.input_dim = 3;
  t.output_dim = 3;
  EXPECT_THROW(fit_operator(task, frame, t), StructuralError);
}

TEST(EvaluateOperatorTest, SplitsTruncationAndNetworkError) {
  const BasisFrame frame = BasisFrame::fourier(16, 3, 3);
  const OperatorModel model(frame, Network::latent(NetworkStructure::Plain, ChannelKind::scalar(), 3, 0.0, {}));
  Matrix in(16, 1), out(16, 1);
  for (int p = 0; p < 16; ++p) {
    in(p, 0) = std::cos(2 * M_PI * p / 16.0);
    out(p, 0) = std::cos(2 * M_PI * p / 16.0) + std::cos(6 * M_PI * p / 16.0);
  }
  const OperatorMetrics m = evaluate_operator(model, in, out);
  // The cos(6 pi x) part lies outside the output span: relative error 1/sqrt2.
  EXPECT_NEAR(m.truncation_relative_l2, 1.0 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(m.network_relative_l2, 0.0, 1e-14);
  EXPECT_NEAR(m.heldout_relative_l2, 1.0 / std::sqrt(2.0), 1e-14);
}

}  // namespace
}  // namespace nflow
