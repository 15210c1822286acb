#include "nflow/train.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <string>

#include "nflow/discretize.hpp"

namespace nflow {

Network TrainableModel::compile() const {
  return nflow::compile(path, dt, activation).with_lift_readout(lift, readout);
}

std::pair<double, double> alpha_window(double dt, double slope_a, double margin) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  // Each constraint reads 1 - k alpha >= margin.
  for (double k : {dt, slope_a * dt}) {
    if (k > 0.0) hi = std::min(hi, (1.0 - margin) / k);
    if (k < 0.0) lo = std::max(lo, (1.0 - margin) / k);
  }
  return {lo, hi};
}

TrainableModel initialize_model(const FitTemplate& tmpl, std::uint64_t seed) {
  if (tmpl.channels < 1 || tmpl.input_dim < 1 || tmpl.output_dim < 1) {
    throw StructuralError("template dimensions must be positive");
  }
  if (tmpl.segments < 1 || tmpl.steps_per_segment < 1) throw StructuralError("template needs segments and steps");
  if (!(tmpl.dt > 0.0)) throw DomainError("template dt must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int D = tmpl.channels;
  const auto draw = [&](Eigen::Index r, Eigen::Index c, double stddev) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = stddev * normal(rng);
    return m;
  };
  std::vector<ParamSegment> segs;
  for (int s = 0; s < tmpl.segments; ++s) {
    ParamSegment seg;
    seg.duration = tmpl.dt * tmpl.steps_per_segment;
    seg.W = draw(D, D, tmpl.weight_scale / std::sqrt(static_cast<double>(D)));
    seg.b = draw(D, 1, tmpl.bias_scale);
    seg.alpha = tmpl.structure == Structure::Separation ? tmpl.alpha_init : 0.0;
    segs.push_back(std::move(seg));
  }
  const auto [lo, hi] = alpha_window(tmpl.dt, tmpl.slope_a);
  for (auto& seg : segs) seg.alpha = std::clamp(seg.alpha, lo, hi);
  Matrix lift = draw(D, tmpl.input_dim, tmpl.io_scale / std::sqrt(static_cast<double>(tmpl.input_dim)));
  Matrix readout = draw(tmpl.output_dim, D, tmpl.io_scale / std::sqrt(static_cast<double>(D)));
  return TrainableModel{ParamPath(tmpl.structure, std::move(segs)), std::move(lift), std::move(readout), tmpl.dt,
                        ActivationFamily{tmpl.slope_a}};
}

namespace {

bool alpha_trainable(const TrainableModel& m, bool train_alpha) {
  return train_alpha && m.path.structure() == Structure::Separation;
}

}  // namespace

Vector flatten(const TrainableModel& model, bool train_alpha) {
  const bool with_alpha = alpha_trainable(model, train_alpha);
  std::vector<double> out;
  for (const auto& seg : model.path.segments()) {
    const auto& W = std::get<Matrix>(seg.W);
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) out.push_back(W(i, j));
    for (Eigen::Index i = 0; i < seg.b.rows(); ++i) out.push_back(seg.b(i, 0));
    if (with_alpha) out.push_back(seg.alpha);
  }
  for (const Matrix* m : {&model.lift, &model.readout})
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) out.push_back((*m)(i, j));
  return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

TrainableModel unflatten(const TrainableModel& like, const Vector& params, bool train_alpha) {
  const bool with_alpha = alpha_trainable(like, train_alpha);
  Eigen::Index k = 0;
  const auto next = [&]() {
    if (k >= params.size()) throw StructuralError("parameter vector too short");
    return params(k++);
  };
  std::vector<ParamSegment> segs;
  for (const auto& seg : like.path.segments()) {
    ParamSegment s = seg;
    Matrix W = std::get<Matrix>(seg.W);
    for (Eigen::Index i = 0; i < W.rows(); ++i)
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = next();
    s.W = std::move(W);
    for (Eigen::Index i = 0; i < s.b.rows(); ++i) s.b(i, 0) = next();
    if (with_alpha) s.alpha = next();
    segs.push_back(std::move(s));
  }
  Matrix lift = like.lift, readout = like.readout;
  for (Matrix* m : {&lift, &readout})
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = next();
  if (k != params.size()) throw StructuralError("parameter vector too long");
  return TrainableModel{ParamPath(like.path.structure(), std::move(segs)), std::move(lift), std::move(readout),
                        like.dt, like.activation};
}

namespace {

struct Tape {
  std::vector<Matrix> inputs;  ///< z^{l-1}
  std::vector<Matrix> pre;     ///< pre-activation of layer l
  Matrix output;               ///< z^L
};

Tape run_forward(const Network& net, const Matrix& v) {
  Tape tape;
  Matrix z = net.lift() * v;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const Layer& layer = net.layers()[l];
    Matrix pre = layer.linear.apply(z);
    add_bias(pre, layer.bias);
    Matrix next;
    switch (layer.kind) {
      case LayerKind::Residual:
        next = z + layer.scale * activate(ActivationFamily{layer.slope}, pre);
        break;
      case LayerKind::PlainActivated:
        next = activate(ActivationFamily{layer.slope}, layer.scale * pre);
        break;
      case LayerKind::Affine:
        next = pre;
        break;
    }
    if (!next.allFinite()) throw NumericError("non-finite activation after layer " + std::to_string(l), l);
    tape.inputs.push_back(std::move(z));
    tape.pre.push_back(std::move(pre));
    z = std::move(next);
  }
  tape.output = std::move(z);
  return tape;
}

/// Layer index -> segment index for the compiled network.
std::vector<std::size_t> layer_segments(const TrainableModel& model) {
  const auto steps = aligned_steps(model.path, model.dt);
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < steps.size(); ++s)
    for (long k = 0; k < steps[s]; ++k) out.push_back(s);
  return out;
}

}  // namespace

LossGradient loss_and_gradient(const TrainableModel& model, bool train_alpha, const Matrix& inputs,
                               const Matrix& targets) {
  if (inputs.cols() == 0) throw StructuralError("probe set is empty");
  if (inputs.cols() != targets.cols()) throw StructuralError("inputs and targets differ in probe count");
  if (targets.rows() != model.readout.rows()) throw StructuralError("target dimension does not match the readout");
  for (const auto& seg : model.path.segments()) {
    if (!is_dense(seg.W)) throw StructuralError("training supports dense couplings only");
  }
  const Network net = model.compile();
  const Tape tape = run_forward(net, inputs);
  const auto seg_of = layer_segments(model);

  const double count = static_cast<double>(targets.size());
  const Matrix residual = model.readout * tape.output - targets;
  LossGradient out;
  out.loss = residual.squaredNorm() / count;

  const Matrix g_out = (2.0 / count) * residual;
  const Matrix g_readout = g_out * tape.output.transpose();
  Matrix gz = model.readout.transpose() * g_out;

  const std::size_t S = model.path.size();
  const int D = model.path.channels();
  std::vector<Matrix> gW(S, Matrix::Zero(D, D));
  std::vector<Vector> gb(S, Vector::Zero(D));
  std::vector<double> galpha(S, 0.0);
  const double dt = model.dt;
  const double a = model.activation.slope_a;
  const bool separation = model.path.structure() == Structure::Separation;

  for (std::size_t l = net.layers().size(); l-- > 0;) {
    const std::size_t s = seg_of[l];
    const Matrix& z = tape.inputs[l];
    const Matrix& pre = tape.pre[l];
    const auto& W = std::get<Matrix>(model.path.segment(s).W);
    if (separation) {
      const double alpha = model.path.segment(s).alpha;
      const double sp = 1.0 / (1.0 - dt * alpha);
      const double sn = 1.0 / (1.0 - a * dt * alpha);
      Matrix gv(pre.rows(), pre.cols());
      double ga = 0.0;
      for (Eigen::Index j = 0; j < pre.cols(); ++j) {
        for (Eigen::Index i = 0; i < pre.rows(); ++i) {
          const double v = pre(i, j);
          const double g = gz(i, j);
          if (v >= 0.0) {
            gv(i, j) = g * sp;
            ga += g * v * dt * sp * sp;
          } else {
            gv(i, j) = g * sn;
            ga += g * v * a * dt * sn * sn;
          }
        }
      }
      galpha[s] += ga;
      gW[s] += dt * gv * z.transpose();
      gb[s] += dt * gv.rowwise().sum();
      // (I + dt W)^T gv
      gz = gv + dt * W.transpose() * gv;
    } else {
      Matrix gu(pre.rows(), pre.cols());
      for (Eigen::Index j = 0; j < pre.cols(); ++j)
        for (Eigen::Index i = 0; i < pre.rows(); ++i)
          gu(i, j) = dt * gz(i, j) * model.activation.derivative(pre(i, j));
      gW[s] += gu * z.transpose();
      gb[s] += gu.rowwise().sum();
      gz = gz + W.transpose() * gu;
    }
  }
  const Matrix g_lift = gz * inputs.transpose();

  const bool with_alpha = alpha_trainable(model, train_alpha);
  std::vector<double> flat;
  for (std::size_t s = 0; s < S; ++s) {
    for (Eigen::Index i = 0; i < D; ++i)
      for (Eigen::Index j = 0; j < D; ++j) flat.push_back(gW[s](i, j));
    for (Eigen::Index i = 0; i < D; ++i) flat.push_back(gb[s](i));
    if (with_alpha) flat.push_back(galpha[s]);
  }
  for (const Matrix* m : {&g_lift, &g_readout})
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) flat.push_back((*m)(i, j));
  out.gradient = Eigen::Map<Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
  return out;
}

Vector kink_distance(const TrainableModel& model, const Matrix& inputs) {
  const Tape tape = run_forward(model.compile(), inputs);
  Vector dist = Vector::Constant(inputs.cols(), std::numeric_limits<double>::infinity());
  for (const auto& pre : tape.pre) {
    for (Eigen::Index j = 0; j < pre.cols(); ++j) dist(j) = std::min(dist(j), pre.col(j).cwiseAbs().minCoeff());
  }
  return dist;
}

namespace {

class Objective {
 public:
  Objective(const TrainableModel& like, bool train_alpha, const Matrix& inputs, const Matrix& targets)
      : like_(like), train_alpha_(train_alpha), inputs_(inputs), targets_(targets) {
    const auto [lo, hi] = alpha_window(like.dt, like.activation.slope_a);
    lo_ = lo;
    hi_ = hi;
    // Record the flat positions of each alpha so they can be projected.
    if (alpha_trainable(like, train_alpha)) {
      const Eigen::Index D = like.path.channels();
      Eigen::Index k = 0;
      for (std::size_t s = 0; s < like.path.size(); ++s) {
        k += D * D + D;
        alpha_slots_.push_back(k);
        k += 1;
      }
    }
  }

  LossGradient evaluate(const Vector& params) const {
    return loss_and_gradient(unflatten(like_, params, train_alpha_), train_alpha_, inputs_, targets_);
  }

  void project(Vector& params) const {
    for (Eigen::Index k : alpha_slots_) params(k) = std::clamp(params(k), lo_, hi_);
  }

 private:
  const TrainableModel& like_;
  bool train_alpha_;
  const Matrix& inputs_;
  const Matrix& targets_;
  double lo_ = 0.0, hi_ = 0.0;
  std::vector<Eigen::Index> alpha_slots_;
};

void check_finite(double loss, std::size_t iteration) {
  if (!std::isfinite(loss)) {
    throw NumericError("loss became non-finite at iteration " + std::to_string(iteration), iteration);
  }
}

}  // namespace

FitResult fit(const FitTask& task, const FitTemplate& tmpl) {
  if (task.inputs.cols() == 0) throw StructuralError("training set is empty");
  if (task.inputs.cols() != task.targets.cols()) throw StructuralError("inputs and targets differ in probe count");
  if (task.inputs.rows() != tmpl.input_dim || task.targets.rows() != tmpl.output_dim) {
    throw StructuralError("task dimensions do not match the template");
  }
  const TrainableModel init = initialize_model(tmpl, task.seed);
  const bool train_alpha = tmpl.train_alpha;
  const Objective objective(init, train_alpha, task.inputs, task.targets);
  const auto& opt = task.optimizer;

  Vector x = flatten(init, train_alpha);
  objective.project(x);
  Vector best_x = x;
  double best_loss = std::numeric_limits<double>::infinity();
  std::vector<double> curve;
  std::size_t iteration = 0;

  auto record = [&](const Vector& at, double loss) {
    check_finite(loss, iteration);
    curve.push_back(loss);
    if (loss < best_loss) {
      best_loss = loss;
      best_x = at;
    }
    ++iteration;
  };

  // Adam with exponential learning-rate decay.
  {
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-12;
    Vector m = Vector::Zero(x.size()), v = Vector::Zero(x.size());
    const int iters = std::max(0, opt.iterations);
    const double decay = iters > 1 ? std::pow(opt.final_learning_rate / opt.learning_rate, 1.0 / (iters - 1)) : 1.0;
    double lr = opt.learning_rate;
    for (int t = 1; t <= iters; ++t) {
      const LossGradient lg = objective.evaluate(x);
      record(x, lg.loss);
      m = beta1 * m + (1.0 - beta1) * lg.gradient;
      v = beta2 * v + (1.0 - beta2) * lg.gradient.cwiseProduct(lg.gradient);
      const double c1 = 1.0 - std::pow(beta1, t);
      const double c2 = 1.0 - std::pow(beta2, t);
      x -= (lr / c1) * (m.array() / ((v.array() / c2).sqrt() + eps)).matrix();
      objective.project(x);
      lr *= decay;
    }
  }

  // L-BFGS polish from the best Adam iterate.
  if (opt.lbfgs_iterations > 0) {
    x = best_x;
    LossGradient cur = objective.evaluate(x);
    record(x, cur.loss);
    std::deque<Vector> s_hist, y_hist;
    for (int it = 0; it < opt.lbfgs_iterations; ++it) {
      Vector q = cur.gradient;
      std::vector<double> alphas(s_hist.size());
      for (std::size_t i = s_hist.size(); i-- > 0;) {
        const double rho = 1.0 / y_hist[i].dot(s_hist[i]);
        alphas[i] = rho * s_hist[i].dot(q);
        q -= alphas[i] * y_hist[i];
      }
      if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      for (std::size_t i = 0; i < s_hist.size(); ++i) {
        const double rho = 1.0 / y_hist[i].dot(s_hist[i]);
        const double beta = rho * y_hist[i].dot(q);
        q += (alphas[i] - beta) * s_hist[i];
      }
      Vector dir = -q;
      if (dir.dot(cur.gradient) >= 0.0) {
        dir = -cur.gradient;
        s_hist.clear();
        y_hist.clear();
      }
      // Backtracking Armijo line search.
      double step = s_hist.empty() ? std::min(1.0, 1e-2 / std::max(1e-300, cur.gradient.norm())) : 1.0;
      bool accepted = false;
      Vector nx;
      LossGradient next;
      for (int ls = 0; ls < 40; ++ls) {
        nx = x + step * dir;
        objective.project(nx);
        next = objective.evaluate(nx);
        if (std::isfinite(next.loss) && next.loss <= cur.loss + 1e-4 * cur.gradient.dot(nx - x)) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) break;
      record(nx, next.loss);
      const Vector s = nx - x;
      const Vector y = next.gradient - cur.gradient;
      if (s.dot(y) > 1e-16 * s.norm() * y.norm()) {
        s_hist.push_back(s);
        y_hist.push_back(y);
        if (static_cast<int>(s_hist.size()) > opt.lbfgs_history) {
          s_hist.pop_front();
          y_hist.pop_front();
        }
      }
      x = nx;
      cur = next;
      if (cur.loss == 0.0) break;
    }
  }

  if (curve.empty()) {
    const LossGradient lg = objective.evaluate(x);
    record(x, lg.loss);
  }
  TrainableModel best = unflatten(init, best_x, train_alpha);
  Network net = best.compile();
  return FitResult{std::move(best), std::move(net), std::move(curve), best_loss};
}

OperatorMetrics evaluate_operator(const OperatorModel& model, const Matrix& inputs, const Matrix& outputs) {
  if (inputs.cols() == 0) throw StructuralError("evaluation set is empty");
  if (inputs.cols() != outputs.cols()) throw StructuralError("inputs and outputs differ in sample count");
  OperatorMetrics m;
  m.coefficient_bound = model.coefficient_bound;
  const Matrix& xi = model.frame.output_basis();
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    const Vector truth = outputs.col(c);
    const Vector pred = operator_forward(model, inputs.col(c));
    const Vector proj = xi.transpose() * encode_output(model.frame, truth);
    const double denom = std::max(grid_l2_norm(truth), 1e-300);
    m.heldout_relative_l2 += grid_l2_norm(pred - truth) / denom;
    m.truncation_relative_l2 += grid_l2_norm(truth - proj) / denom;
    m.network_relative_l2 += grid_l2_norm(pred - proj) / denom;
  }
  const double n = static_cast<double>(inputs.cols());
  m.heldout_relative_l2 /= n;
  m.truncation_relative_l2 /= n;
  m.network_relative_l2 /= n;
  return m;
}

OperatorFitResult fit_operator(const OperatorTask& task, const BasisFrame& frame, const FitTemplate& tmpl) {
  if (task.train_inputs.cols() == 0) throw StructuralError("training set is empty");
  if (task.train_inputs.cols() != task.train_outputs.cols()) {
    throw StructuralError("training inputs and outputs differ in sample count");
  }
  if (tmpl.input_dim != frame.k() || tmpl.output_dim != frame.m()) {
    throw StructuralError("template input/output dimensions must equal the frame's k and m");
  }
  const Matrix coeff_in = encode_columns(frame, task.train_inputs);
  Matrix coeff_out(frame.m(), task.train_outputs.cols());
  for (Eigen::Index c = 0; c < task.train_outputs.cols(); ++c) {
    coeff_out.col(c) = encode_output(frame, task.train_outputs.col(c));
  }
  // Inputs are normalized into the box [-1, 1]^k by the coefficient bound.
  double bound = coeff_in.size() > 0 ? coeff_in.cwiseAbs().maxCoeff() : 0.0;
  if (!(bound > 0.0)) bound = 1.0;

  FitTask ft;
  ft.inputs = coeff_in / bound;
  ft.targets = coeff_out;
  ft.optimizer = task.optimizer;
  ft.seed = task.seed;
  FitResult fr = fit(ft, tmpl);

  Matrix lift = fr.network.lift() / bound;
  Network core = fr.network.with_lift_readout(std::move(lift), fr.network.readout());
  OperatorModel model(frame, std::move(core), bound);
  OperatorMetrics metrics;
  if (task.heldout_inputs.cols() > 0) {
    metrics = evaluate_operator(model, task.heldout_inputs, task.heldout_outputs);
  } else {
    metrics.coefficient_bound = bound;
  }
  return OperatorFitResult{std::move(model), metrics, std::move(fr.loss_curve)};
}

}  // namespace nflow
