#pragma once

#include <cstdint>
#include <vector>

#include "nflow/core.hpp"
#include "nflow/network.hpp"
#include "nflow/neural_operator.hpp"
#include "nflow/params.hpp"

namespace nflow {

/// Shape of the parameter path being fitted, and its initialization.
struct FitTemplate {
  Structure structure = Structure::Separation;
  int channels = 2;
  int input_dim = 1;
  int output_dim = 1;
  int segments = 1;
  int steps_per_segment = 1;
  double dt = 0.1;
  double slope_a = 0.0;
  bool train_alpha = true;
  double alpha_init = 0.0;
  double weight_scale = 0.5;
  double bias_scale = 0.1;
  double io_scale = 1.0;
};

struct OptimizerConfig {
  int iterations = 2000;
  double learning_rate = 1e-2;
  /// Exponential decay from learning_rate to this value over the Adam phase.
  double final_learning_rate = 1e-4;
  /// Optional L-BFGS polishing iterations after Adam.
  int lbfgs_iterations = 0;
  int lbfgs_history = 10;
};

struct FitTask {
  Matrix inputs;   ///< d_in x P
  Matrix targets;  ///< d_out x P
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
};

/// Parameter path plus lift/readout: the object being optimized.
struct TrainableModel {
  ParamPath path;
  Matrix lift;
  Matrix readout;
  double dt;
  ActivationFamily activation;

  Network compile() const;
};

/// Random model with the template's shape; deterministic in the seed.
TrainableModel initialize_model(const FitTemplate& tmpl, std::uint64_t seed);

/// Flat parameter vector layout: per segment W (row-major), b, then alpha
/// when trainable; then lift and readout (row-major).
Vector flatten(const TrainableModel& model, bool train_alpha);
TrainableModel unflatten(const TrainableModel& like, const Vector& params, bool train_alpha);

struct LossGradient {
  double loss = 0.0;
  Vector gradient;
};

/// Mean squared error over all probes and outputs, with its gradient by a
/// reverse pass through the compiled layers. The kink takes the
/// positive-branch slope.
LossGradient loss_and_gradient(const TrainableModel& model, bool train_alpha, const Matrix& inputs,
                               const Matrix& targets);

/// Smallest |pre-activation| seen by each probe across all layers.
Vector kink_distance(const TrainableModel& model, const Matrix& inputs);

/// Interval of alpha keeping 1 - dt alpha >= margin and 1 - a dt alpha >= margin.
std::pair<double, double> alpha_window(double dt, double slope_a, double margin = 0.05);

struct FitResult {
  TrainableModel model;
  Network network;
  std::vector<double> loss_curve;
  double best_loss = 0.0;
};

FitResult fit(const FitTask& task, const FitTemplate& tmpl);

struct OperatorTask {
  /// Functions are columns sampled on the frame grid (N x count).
  Matrix train_inputs;
  Matrix train_outputs;
  Matrix heldout_inputs;
  Matrix heldout_outputs;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
};

struct OperatorMetrics {
  /// Mean over held-out pairs of ||pred - true|| / ||true||.
  double heldout_relative_l2 = 0.0;
  /// Part of the error coming from projecting targets on the output basis.
  double truncation_relative_l2 = 0.0;
  /// Part of the error coming from the coefficient network.
  double network_relative_l2 = 0.0;
  double coefficient_bound = 0.0;
};

struct OperatorFitResult {
  OperatorModel model;
  OperatorMetrics metrics;
  std::vector<double> loss_curve;
};

OperatorFitResult fit_operator(const OperatorTask& task, const BasisFrame& frame, const FitTemplate& tmpl);

OperatorMetrics evaluate_operator(const OperatorModel& model, const Matrix& inputs, const Matrix& outputs);

}  // namespace nflow
