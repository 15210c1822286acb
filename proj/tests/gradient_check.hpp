#pragma once

#include <random>

#include "nflow/train.hpp"

namespace nflow::testing_support {

struct GradientCase {
  TrainableModel model;
  Matrix inputs;
  Matrix targets;
  bool train_alpha = true;
};

/// Small random model with probes kept at least 1e-4 away from every kink.
inline GradientCase random_gradient_case(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick(1, 3);
  for (;;) {
    FitTemplate t;
    t.structure = u(rng) < 0.5 ? Structure::Composition : Structure::Separation;
    t.channels = 1 + pick(rng);
    t.input_dim = pick(rng);
    t.output_dim = pick(rng);
    t.segments = std::min(2, pick(rng));
    t.steps_per_segment = pick(rng);
    t.dt = 0.1 + 0.2 * u(rng);
    t.slope_a = -0.5 + 1.4 * u(rng);
    t.alpha_init = -1.0 + 2.0 * u(rng);
    t.weight_scale = 1.0;
    t.bias_scale = 0.5;
    TrainableModel model = initialize_model(t, rng());
    Matrix x(t.input_dim, 6), y(t.output_dim, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = -1.0 + 2.0 * u(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = -1.0 + 2.0 * u(rng);
    const Vector kd = kink_distance(model, x);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index p = 0; p < kd.size(); ++p)
      if (kd(p) >= 1e-4) keep.push_back(p);
    if (keep.empty()) continue;
    Matrix xs(x.rows(), static_cast<Eigen::Index>(keep.size())), ys(y.rows(), xs.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) {
      xs.col(static_cast<Eigen::Index>(k)) = x.col(keep[k]);
      ys.col(static_cast<Eigen::Index>(k)) = y.col(keep[k]);
    }
    return GradientCase{std::move(model), std::move(xs), std::move(ys), true};
  }
}

/// ||g_reverse - g_central|| / ||g_central|| with central step h.
inline double gradient_relative_error(const GradientCase& c, double h = 1e-5) {
  const LossGradient lg = loss_and_gradient(c.model, c.train_alpha, c.inputs, c.targets);
  const Vector x0 = flatten(c.model, c.train_alpha);
  Vector fd(x0.size());
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    Vector xp = x0, xm = x0;
    xp(i) += h;
    xm(i) -= h;
    const double lp = loss_and_gradient(unflatten(c.model, xp, c.train_alpha), c.train_alpha, c.inputs, c.targets).loss;
    const double lm = loss_and_gradient(unflatten(c.model, xm, c.train_alpha), c.train_alpha, c.inputs, c.targets).loss;
    fd(i) = (lp - lm) / (2.0 * h);
  }
  return (lg.gradient - fd).norm() / std::max(fd.norm(), 1e-12);
}

}  // namespace nflow::testing_support
