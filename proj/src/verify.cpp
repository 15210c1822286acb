#include "nflow/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "nflow/convops.hpp"
#include "nflow/discretize.hpp"
#include "nflow/errors.hpp"
#include "nflow/flow.hpp"
#include "nflow/network.hpp"

namespace nflow::verify {

namespace {

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = uniform(rng, -scale, scale);
  }
  return m;
}

CheckResult result(const char* suite, const char* name, double measured, double threshold, bool passed,
                   std::string detail = {}) {
  return CheckResult{suite, name, measured, threshold, passed, std::move(detail)};
}

/// Worst value of |x| over a list of states.
double sup_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

std::vector<double> random_durations(Rng& rng, int segments, double lo, double hi) {
  std::vector<double> d(static_cast<std::size_t>(segments));
  for (auto& x : d) x = uniform(rng, lo, hi);
  return d;
}

// ---- convergence problems ----

struct ConvergenceProblem {
  ParamPath path;
  ActivationFamily fam;
  std::vector<LatentState> probes;
};

ConvergenceProblem draw_problem(Rng& rng, Structure structure) {
  const int D = uniform_int(rng, 1, 4);
  const int segs = uniform_int(rng, 1, 3);
  const int max_eighths = 8 / segs;
  std::vector<double> durations;
  for (int s = 0; s < segs; ++s) durations.push_back(uniform_int(rng, 1, max_eighths) / 8.0);
  const ActivationFamily fam{uniform(rng, -0.5, 0.9)};

  // Every probe shares one sign pattern so a single bias pushes all of them
  // away from the kink.
  std::vector<double> sign(static_cast<std::size_t>(D));
  for (auto& s : sign) s = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;

  std::vector<ParamSegment> out;
  for (double tau : durations) {
    Matrix W = random_matrix(rng, D, D, 1.0);
    for (Eigen::Index i = 0; i < D; ++i) {
      const double rs = W.row(i).cwiseAbs().sum();
      if (rs > 0.0) W.row(i) *= uniform(rng, 0.15, 0.3) / rs;
    }
    Matrix b(D, 1);
    double alpha = 0.0;
    if (structure == Structure::Composition) {
      for (Eigen::Index i = 0; i < D; ++i) b(i, 0) = (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(rng, 0.8, 1.5);
    } else {
      for (Eigen::Index i = 0; i < D; ++i) b(i, 0) = sign[static_cast<std::size_t>(i)] * uniform(rng, 0.2, 1.0);
      alpha = uniform(rng, -1.0, 1.0);
    }
    out.push_back(ParamSegment{tau, std::move(W), std::move(b), alpha});
  }
  std::vector<LatentState> probes;
  for (int k = 0; k < 4; ++k) {
    Vector z(D);
    for (Eigen::Index i = 0; i < D; ++i) {
      z(i) = structure == Structure::Composition ? uniform(rng, -1.0, 1.0)
                                                 : sign[static_cast<std::size_t>(i)] * uniform(rng, 0.5, 1.5);
    }
    probes.push_back(LatentState::scalars(z));
  }
  return ConvergenceProblem{ParamPath(structure, std::move(out)), fam, std::move(probes)};
}

/// Quantity whose sign decides the activation branch in the continuous flow.
Matrix branch_argument(const ParamSegment& seg, Structure structure, const Matrix& z) {
  if (structure == Structure::Separation) return z;
  Matrix pre = apply_coupling(seg.W, z);
  add_bias(pre, seg.b);
  return pre;
}

/// True when neither the reference nor any discrete trajectory comes within
/// `margin` of an activation kink.
bool sign_stable(const ConvergenceProblem& pr, const std::vector<double>& dts, double margin) {
  const Structure st = pr.path.structure();
  for (const auto& probe : pr.probes) {
    double closest = INFINITY;
    Matrix last = probe.values();
    const auto observe = [&](double, std::size_t seg, const Matrix& z) {
      const auto& s = pr.path.segment(seg);
      closest = std::min(closest, branch_argument(s, st, last).cwiseAbs().minCoeff());
      closest = std::min(closest, branch_argument(s, st, z).cwiseAbs().minCoeff());
      last = z;
    };
    integrate_reference(FlowProblem(pr.path, probe, pr.fam), 256, observe);
    if (closest < margin) return false;

    for (double dt : dts) {
      const Network net = compile(pr.path, dt, pr.fam);
      Matrix z = probe.values();
      for (const auto& layer : net.layers()) {
        if (layer.kind != LayerKind::Affine) {
          Matrix pre = layer.linear.apply(z);
          add_bias(pre, layer.bias);
          if (pre.cwiseAbs().minCoeff() < 0.5 * margin) return false;
        }
        z = layer.apply(z);
      }
    }
  }
  return true;
}

Vector rk4_segment_step(const Field& f, std::size_t seg, const Vector& z, double h) {
  const Vector k1 = f(seg, z);
  const Vector k2 = f(seg, z + 0.5 * h * k1);
  const Vector k3 = f(seg, z + 0.5 * h * k2);
  const Vector k4 = f(seg, z + h * k3);
  return z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

ParamPath random_like(Rng& rng, const ParamPath& p, double scale) {
  std::vector<double> d;
  for (const auto& s : p.segments()) d.push_back(s.duration);
  return random_dense_path(rng, p.structure(), p.channels(), d, scale);
}

Network random_network(Rng& rng) {
  const Structure st = uniform(rng, 0.0, 1.0) < 0.5 ? Structure::Composition : Structure::Separation;
  const int D = uniform_int(rng, 1, 4);
  const double dt = 1.0 / uniform_int(rng, 2, 8);
  std::vector<double> d;
  for (int s = uniform_int(rng, 1, 3); s > 0; --s) d.push_back(dt * uniform_int(rng, 1, 3));
  const ActivationFamily fam{uniform(rng, -0.5, 0.9)};
  const bool conv = uniform(rng, 0.0, 1.0) < 0.3;
  if (!conv) {
    const Network net = compile(random_dense_path(rng, st, D, d, 1.0), dt, fam);
    const int din = uniform_int(rng, 1, 3), dout = uniform_int(rng, 1, 3);
    return net.with_lift_readout(random_matrix(rng, D, din, 1.0), random_matrix(rng, dout, D, 1.0));
  }
  const ChannelKind grid = ChannelKind::grid(4, uniform_int(rng, 1, 2));
  std::vector<ParamSegment> segs;
  for (double tau : d) {
    std::vector<KernelEntry> entries;
    for (int e = 0; e < D * D; ++e) {
      if (uniform(rng, 0.0, 1.0) < 0.5) {
        entries.emplace_back(ConstantEntry{uniform(rng, -1.0, 1.0)});
      } else {
        entries.emplace_back(GridEntry{random_matrix(rng, grid.points(), 1, 1.0)});
      }
    }
    const double alpha = st == Structure::Separation ? uniform(rng, -1.0, 1.0) : 0.0;
    segs.push_back(ParamSegment{tau, ConvKernel(grid, D, std::move(entries)), random_matrix(rng, D, 1, 1.0), alpha});
  }
  return compile(ParamPath(st, std::move(segs)), dt, fam);
}

Matrix network_input(Rng& rng, const Network& net) {
  const Eigen::Index cols = net.kind().is_grid() ? net.kind().points() : 3;
  return random_matrix(rng, net.input_dim(), cols, 2.0);
}

bool same_bits(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (std::memcmp(a.data() + i, b.data() + i, sizeof(double)) != 0) return false;
  }
  return true;
}

std::string fmt(const char* pattern, double x, double y = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, x, y);
  return buf;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"core", "flow", "discretize", "conv", "construct"};
  return names;
}

bool is_suite(const std::string& name) {
  if (name == "all") return true;
  const auto& n = suite_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

ParamPath random_dense_path(Rng& rng, Structure structure, int channels, const std::vector<double>& durations,
                            double scale) {
  std::vector<ParamSegment> segs;
  for (double tau : durations) {
    Matrix W = random_matrix(rng, channels, channels, scale);
    Matrix b = random_matrix(rng, channels, 1, scale);
    const double alpha = structure == Structure::Separation ? uniform(rng, -scale, scale) : 0.0;
    segs.push_back(ParamSegment{tau, std::move(W), std::move(b), alpha});
  }
  return ParamPath(structure, std::move(segs));
}

Vector rk4_piecewise(const Field& f, const std::vector<double>& durations, const Vector& z0, double t_end,
                     int substeps_per_segment) {
  Vector z = z0;
  double start = 0.0;
  for (std::size_t s = 0; s < durations.size() && start < t_end; ++s) {
    const double stop = std::min(start + durations[s], t_end);
    const double h = (stop - start) / substeps_per_segment;
    for (int k = 0; k < substeps_per_segment; ++k) z = rk4_segment_step(f, s, z, h);
    start += durations[s];
  }
  return z;
}

Vector signed_target_oracle(const DoubleWidthSpec& spec, const Vector& z0, double t_end, int substeps) {
  const ActivationFamily fam{spec.slope_a};
  std::vector<double> durations;
  for (const auto& s : spec.schedule) durations.push_back(s.duration);
  const Field f = [&](std::size_t seg, const Vector& z) {
    const SignedSegment& s = spec.schedule[seg];
    Vector out = s.A * z + s.b;
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = s.signs[static_cast<std::size_t>(i)] * fam(out(i));
    return out;
  };
  return rk4_piecewise(f, durations, z0, t_end, substeps);
}

// ---- core ----

CheckResult check_leaky_identity(Rng& rng, int samples) {
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const ActivationFamily fam{uniform(rng, -3.0, 3.0)};
    const double t = uniform(rng, -100.0, 100.0);
    const auto [lhs, rhs] = leaky_relu_identity_check(fam, t);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
  }
  return result("core", "leaky_relu_identity", worst, 1e-13, worst <= 1e-13, "relative residual");
}

CheckResult check_activation_lipschitz(Rng& rng, int samples) {
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const ActivationFamily fam{uniform(rng, -3.0, 3.0)};
    const double x = uniform(rng, -10.0, 10.0), y = uniform(rng, -10.0, 10.0);
    if (x == y) continue;
    worst = std::max(worst, std::abs(fam(x) - fam(y)) / (fam.lipschitz() * std::abs(x - y)));
  }
  return result("core", "activation_lipschitz", worst, 1.0 + 1e-12, worst <= 1.0 + 1e-12,
                "max |s(x)-s(y)| / (L |x-y|)");
}

// ---- flow ----

CheckResult check_linear_flow(Rng&) {
  const ParamPath p(Structure::Separation, {ParamSegment{1.0, Matrix::Ones(1, 1), Matrix::Zero(1, 1), 0.0}});
  const LatentState z = integrate_reference(FlowProblem(p, LatentState::scalars(Vector::Ones(1)), ActivationFamily{0.0}), 128);
  const double err = std::abs(z.values()(0, 0) - std::exp(1.0));
  return result("flow", "linear_closed_form", err, 1e-9, err <= 1e-9, "z' = z, z0 = 1, T = 1, 128 substeps");
}

CheckResult check_semigroup(Rng& rng, int cases) {
  double worst = 0.0;
  for (int c = 0; c < cases; ++c) {
    const Structure st = c % 2 == 0 ? Structure::Composition : Structure::Separation;
    const int D = uniform_int(rng, 1, 3);
    const ParamPath p = random_dense_path(rng, st, D, random_durations(rng, uniform_int(rng, 1, 3), 0.1, 0.5), 1.0);
    const ActivationFamily fam{uniform(rng, -0.5, 0.9)};
    const LatentState z0 = LatentState::scalars(random_matrix(rng, D, 1, 1.0).col(0));
    const int substeps = 4096;
    const LatentState full = integrate_reference(FlowProblem(p, z0, fam), substeps);
    const auto [first, second] = split_path(p, 0.5 * p.total_time());
    const LatentState mid = integrate_reference(FlowProblem(first, z0, fam), substeps);
    const LatentState end = integrate_reference(FlowProblem(second, mid, fam), substeps);
    worst = std::max(worst, sup_abs(full.values() - end.values()));
  }
  return result("flow", "semigroup_midpoint_split", worst, 1e-9, worst <= 1e-9, "4096 substeps per segment");
}

CheckResult check_gronwall(Rng& rng, int pairs) {
  double worst = 0.0;
  double worst_gap = 0.0;
  for (int c = 0; c < pairs; ++c) {
    const Structure st = uniform(rng, 0.0, 1.0) < 0.5 ? Structure::Composition : Structure::Separation;
    const int D = uniform_int(rng, 1, 4);
    const ParamPath p1 = random_dense_path(rng, st, D, random_durations(rng, uniform_int(rng, 1, 3), 0.1, 0.5), 1.0);
    const ParamPath raw = random_like(rng, p1, 1.0);
    const double eps = uniform(rng, 1e-4, 0.05);
    std::vector<ParamSegment> scaled = raw.segments();
    const double n = path_sup_norm(raw);
    for (auto& s : scaled) {
      std::get<Matrix>(s.W) *= eps / n;
      s.b *= eps / n;
      s.alpha *= eps / n;
    }
    const ParamPath p2 = perturb(p1, ParamPath(st, std::move(scaled)));
    const ActivationFamily fam{uniform(rng, -1.0, 1.0)};
    const LatentState z0 = LatentState::scalars(random_matrix(rng, D, 1, 1.0).col(0));

    std::vector<Matrix> traj1, traj2;
    double sup = sup_abs(z0.values());
    integrate_reference(FlowProblem(p1, z0, fam), 64, [&](double, std::size_t, const Matrix& z) {
      traj1.push_back(z);
      sup = std::max(sup, sup_abs(z));
    });
    integrate_reference(FlowProblem(p2, z0, fam), 64, [&](double, std::size_t, const Matrix& z) {
      traj2.push_back(z);
      sup = std::max(sup, sup_abs(z));
    });
    double gap = 0.0;
    for (std::size_t k = 0; k < traj1.size(); ++k) gap = std::max(gap, sup_abs(traj1[k] - traj2[k]));
    const StabilityBound b = gronwall_bound(p1, p2, sup, fam);
    const double ratio = gap / b.bound;
    if (ratio > worst) {
      worst = ratio;
      worst_gap = gap;
    }
  }
  return result("flow", "gronwall_bound", worst, 1.0, worst <= 1.0,
                fmt("max measured/bound; gap at worst %.3e", worst_gap));
}

// ---- discretize ----

CheckResult check_inverse_step(Rng& rng, int samples) {
  double worst = 0.0;
  int drawn = 0;
  while (drawn < samples) {
    const ActivationFamily fam{uniform(rng, -0.5, 0.9)};
    const double dt = 0.9 - uniform(rng, 0.0, 0.9);
    const double alpha = uniform(rng, 0.0, 1.0);
    if (!(1.0 - dt * alpha > 0.0) || !(1.0 - fam.slope_a * dt * alpha > 0.0)) continue;
    ++drawn;
    const double w = uniform(rng, -10.0, 10.0);
    const double z = solve_implicit_step(fam, dt, alpha).apply(w);
    const double residual = z - dt * alpha * fam(z) - w;
    worst = std::max(worst, std::abs(residual) / std::max(1.0, std::abs(w)));
  }
  return result("discretize", "inverse_step_identity", worst, 1e-12, worst <= 1e-12,
                "|z - dt alpha s(z) - w| / max(1,|w|)");
}

CheckResult check_convergence(Rng& rng, Structure structure, int problems) {
  const std::vector<double> dts{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
  double lo = INFINITY, hi = -INFINITY;
  int accepted = 0, attempts = 0;
  while (accepted < problems && attempts < 200 * problems) {
    ++attempts;
    const ConvergenceProblem pr = draw_problem(rng, structure);
    if (!sign_stable(pr, dts, 0.05)) continue;
    ++accepted;
    const ErrorTable table = measure_discretization_error(pr.path, dts, pr.fam, pr.probes, 256);
    for (std::size_t r = 1; r < table.rows.size(); ++r) {
      lo = std::min(lo, table.rows[r].ratio);
      hi = std::max(hi, table.rows[r].ratio);
    }
  }
  const bool ok = accepted == problems && lo >= 1.6 && hi <= 2.4;
  const double dev = accepted == 0 ? INFINITY : std::max(std::abs(lo - 2.0), std::abs(hi - 2.0));
  const char* name = structure == Structure::Composition ? "euler_first_order" : "split_first_order";
  return result("discretize", name, dev, 0.4, ok,
                fmt("ratio range [%.4f, ", lo) + fmt("%.4f] over ", hi) + std::to_string(accepted) + " problems");
}

CheckResult check_model_roundtrip(Rng& rng, int networks) {
  int mismatches = 0;
  for (int k = 0; k < networks; ++k) {
    const Network net = random_network(rng);
    const std::string doc = save(net);
    const Network back = load(doc);
    const Matrix v = network_input(rng, net);
    if (save(back) != doc || !same_bits(forward(net, v), forward(back, v))) ++mismatches;
  }
  return result("discretize", "model_roundtrip_bitwise", mismatches, 0.0, mismatches == 0,
                std::to_string(networks) + " networks");
}

// ---- conv ----

CheckResult check_conv_emulation(Rng& rng, int cases) {
  double worst = 0.0;
  for (int c = 0; c < cases; ++c) {
    const int dims = uniform_int(rng, 1, 2);
    const int n = dims == 1 ? 4 << uniform_int(rng, 0, 2) : 4 << uniform_int(rng, 0, 1);
    const ChannelKind grid = ChannelKind::grid(n, dims);
    const Structure st = uniform(rng, 0.0, 1.0) < 0.5 ? Structure::Composition : Structure::Separation;
    const int D = uniform_int(rng, 1, 4);
    const ParamPath dense = random_dense_path(rng, st, D, random_durations(rng, uniform_int(rng, 1, 3), 0.1, 0.4), 1.0);
    std::vector<ParamSegment> segs = dense.segments();
    for (auto& s : segs) s.W = emulate_dense(std::get<Matrix>(s.W), grid);
    const ParamPath conv(st, std::move(segs));
    const ActivationFamily fam{uniform(rng, -0.5, 0.9)};
    const Vector v = random_matrix(rng, D, 1, 1.0).col(0);
    const LatentState zd = integrate_reference(FlowProblem(dense, LatentState::scalars(v), fam), 64);
    const LatentState zc = integrate_reference(FlowProblem(conv, LatentState::constant_fields(grid, v), fam), 64);
    for (Eigen::Index p = 0; p < zc.points(); ++p) {
      worst = std::max(worst, sup_abs(zc.values().col(p) - zd.values().col(0)));
    }
  }
  return result("conv", "constant_kernel_emulates_dense", worst, 1e-12, worst <= 1e-12);
}

CheckResult check_translation_equivariance(Rng& rng, int cases) {
  double worst = 0.0;
  for (int c = 0; c < cases; ++c) {
    const int dims = uniform_int(rng, 1, 2);
    const int n = dims == 1 ? uniform_int(rng, 3, 16) : uniform_int(rng, 3, 6);
    const ChannelKind grid = ChannelKind::grid(n, dims);
    const int D = uniform_int(rng, 1, 3);
    std::vector<KernelEntry> entries;
    for (int e = 0; e < D * D; ++e) {
      if (uniform(rng, 0.0, 1.0) < 0.3) {
        entries.emplace_back(ConstantEntry{uniform(rng, -1.0, 1.0)});
      } else {
        entries.emplace_back(GridEntry{random_matrix(rng, grid.points(), 1, 1.0)});
      }
    }
    const ConvKernel k(grid, D, std::move(entries));
    const LatentState z(grid, random_matrix(rng, D, grid.points(), 1.0));
    std::vector<int> offsets(static_cast<std::size_t>(dims));
    for (auto& o : offsets) o = uniform_int(rng, -n, n);
    const Matrix lhs = conv_apply(k, cyclic_shift(z, offsets)).values();
    const Matrix rhs = cyclic_shift(conv_apply(k, z), offsets).values();
    worst = std::max(worst, sup_abs(lhs - rhs));
  }
  return result("conv", "translation_equivariance", worst, 0.0, worst == 0.0, "exact");
}

// ---- construct ----

CheckResult check_double_width(Rng& rng, int schedules, int checkpoints) {
  double worst = 0.0;
  for (int c = 0; c < schedules; ++c) {
    DoubleWidthSpec spec;
    spec.d = uniform_int(rng, 1, 3);
    spec.slope_a = uniform(rng, -0.5, 0.9);
    for (int s = uniform_int(rng, 1, 4); s > 0; --s) {
      SignedSegment seg;
      seg.duration = uniform(rng, 0.1, 0.5);
      for (int i = 0; i < spec.d; ++i) seg.signs.push_back(uniform(rng, 0.0, 1.0) < 0.5 ? -1 : 1);
      seg.A = random_matrix(rng, spec.d, spec.d, 1.0);
      seg.b = random_matrix(rng, spec.d, 1, 1.0).col(0);
      spec.schedule.push_back(std::move(seg));
    }
    const DoubleWidthSystem sys = build_double_width(spec);
    const Vector z0 = random_matrix(rng, spec.d, 1, 1.0).col(0);
    const double T = sys.path.total_time();
    for (int k = 1; k <= checkpoints; ++k) {
      const double t = T * k / checkpoints;
      const ParamPath head = k == checkpoints ? sys.path : split_path(sys.path, t).first;
      const LatentState zhat = integrate_reference(FlowProblem(head, LatentState::scalars(sys.lift(z0)), sys.activation), 256);
      const Vector direct = signed_target_oracle(spec, z0, t, 256);
      worst = std::max(worst, sup_abs(sys.read(zhat.values().col(0)) - direct));
    }
  }
  return result("construct", "double_width_readback", worst, 1e-7, worst <= 1e-7);
}

CheckResult check_activation_flow(Rng& rng, int samples) {
  double worst = 0.0;
  int drawn = 0;
  while (drawn < samples) {
    const double a = 5.0 - uniform(rng, 0.0, 5.0);
    if (a == 1.0) continue;
    ++drawn;
    const double w = uniform(rng, -10.0, 10.0);
    const auto [lhs, rhs] = activation_as_flow(a).check(w);
    worst = std::max(worst, std::abs(lhs - rhs) / std::max(1.0, std::abs(w)));
  }
  return result("construct", "activation_as_flow", worst, 1e-12, worst <= 1e-12,
                "|H(e^-tau w) - s(w)| / max(1,|w|), a in (0, 5]");
}

std::vector<CheckResult> run_suite(const std::string& name, std::uint64_t seed) {
  if (!is_suite(name)) throw DomainError("unknown suite '" + name + "'");
  std::vector<CheckResult> out;
  const auto want = [&](const char* s) { return name == "all" || name == s; };
  if (want("core")) {
    Rng rng(seed);
    out.push_back(check_leaky_identity(rng));
    out.push_back(check_activation_lipschitz(rng));
  }
  if (want("flow")) {
    Rng rng(seed);
    out.push_back(check_linear_flow(rng));
    out.push_back(check_semigroup(rng));
    out.push_back(check_gronwall(rng));
  }
  if (want("discretize")) {
    Rng rng(seed);
    out.push_back(check_inverse_step(rng));
    out.push_back(check_convergence(rng, Structure::Composition));
    out.push_back(check_convergence(rng, Structure::Separation));
    out.push_back(check_model_roundtrip(rng));
  }
  if (want("conv")) {
    Rng rng(seed);
    out.push_back(check_conv_emulation(rng));
    out.push_back(check_translation_equivariance(rng));
  }
  if (want("construct")) {
    Rng rng(seed);
    out.push_back(check_double_width(rng));
    out.push_back(check_activation_flow(rng));
  }
  return out;
}

std::string format_report(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  for (const auto& r : results) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-4s %-10s %-32s measured=%.6g threshold=%.6g", r.passed ? "PASS" : "FAIL",
                  r.suite.c_str(), r.name.c_str(), r.measured, r.threshold);
    os << buf;
    if (!r.detail.empty()) os << "  (" << r.detail << ")";
    os << "\n";
  }
  return os.str();
}

}  // namespace nflow::verify
