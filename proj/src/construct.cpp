#include "nflow/construct.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nflow {

namespace {

void validate(const DoubleWidthSpec& spec) {
  if (spec.d < 1) throw StructuralError("double-width system needs d >= 1");
  if (spec.slope_a == -1.0) throw DomainError("slope a = -1 makes the lift 1/(1+a) undefined");
  if (spec.schedule.empty()) throw StructuralError("schedule needs at least one segment");
  for (std::size_t s = 0; s < spec.schedule.size(); ++s) {
    const auto& seg = spec.schedule[s];
    const std::string where = "schedule segment " + std::to_string(s) + ": ";
    if (static_cast<int>(seg.signs.size()) != spec.d) throw StructuralError(where + "needs d signs");
    for (int sg : seg.signs) {
      if (sg != 1 && sg != -1) throw StructuralError(where + "signs must be +1 or -1");
    }
    if (seg.A.rows() != spec.d || seg.A.cols() != spec.d) throw StructuralError(where + "A must be d x d");
    if (seg.b.size() != spec.d) throw StructuralError(where + "b must have d entries");
  }
}

}  // namespace

DoubleWidthSystem build_double_width(const DoubleWidthSpec& spec) {
  validate(spec);
  const int d = spec.d;
  std::vector<ParamSegment> segs;
  segs.reserve(spec.schedule.size());
  for (const auto& s : spec.schedule) {
    Matrix W = Matrix::Zero(2 * d, 2 * d);
    Matrix b = Matrix::Zero(2 * d, 1);
    for (int i = 0; i < d; ++i) {
      // Sign +1 drives the positive part (row i), sign -1 the negative part (row d+i).
      const int row = s.signs[static_cast<std::size_t>(i)] == 1 ? i : d + i;
      W.block(row, 0, 1, d) = s.A.row(i);
      W.block(row, d, 1, d) = -s.A.row(i);
      b(row, 0) = s.b(i);
    }
    segs.push_back(ParamSegment{s.duration, std::move(W), std::move(b), 0.0});
  }
  Matrix S(d, 2 * d);
  S << Matrix::Identity(d, d), -Matrix::Identity(d, d);
  return DoubleWidthSystem{ParamPath(Structure::Composition, std::move(segs)), ActivationFamily{spec.slope_a},
                           std::move(S)};
}

Vector DoubleWidthSystem::lift(const Vector& z0) const {
  const Eigen::Index d = readback.rows();
  if (z0.size() != d) throw StructuralError("initial state must have d entries");
  const double inv = 1.0 / (1.0 + activation.slope_a);
  Vector out(2 * d);
  for (Eigen::Index i = 0; i < d; ++i) {
    out(i) = inv * activation(z0(i));
    out(d + i) = inv * activation(-z0(i));
  }
  return out;
}

Vector signed_target_rhs(const SignedSegment& seg, const ActivationFamily& fam, const Vector& z) {
  Vector pre = seg.A * z + seg.b;
  for (Eigen::Index i = 0; i < pre.size(); ++i) pre(i) = seg.signs[static_cast<std::size_t>(i)] * fam(pre(i));
  return pre;
}

double ActivationFlow::flow(double z, double t) const noexcept {
  if (z > 0.0) return std::exp(t) * z;
  if (z < 0.0) return std::exp(slope_a * t) * z;
  return 0.0;
}

std::pair<double, double> ActivationFlow::check(double w) const noexcept {
  const ActivationFamily fam{slope_a};
  return {apply(std::exp(-tau) * w), fam(w)};
}

ActivationFlow activation_as_flow(double a) {
  if (!(a > 0.0)) throw DomainError("activation-as-flow needs a > 0, got " + std::to_string(a));
  if (a == 1.0) throw DomainError("activation-as-flow needs a != 1");
  return ActivationFlow{a, std::log(a) / (a - 1.0)};
}

Vector UapPipeline::forward(const Vector& x) const {
  if (x.size() != lift.cols()) throw StructuralError("input dimension does not match P1");
  Vector zhat = lift * x;
  for (Eigen::Index i = 0; i < zhat.size(); ++i) zhat(i) = activation_flow.apply(zhat(i));
  const FlowProblem fp(system.path, LatentState::scalars(zhat), system.activation);
  const LatentState end = integrate_reference(fp, substeps);
  return readout * end.values().col(0);
}

UapPipeline assemble_uap_skeleton(const DoubleWidthSpec& spec, const Matrix& P1, const Matrix& R1, int substeps) {
  if (P1.rows() != spec.d) {
    throw StructuralError("P1 maps into R^" + std::to_string(P1.rows()) + ", schedule works in R^" +
                          std::to_string(spec.d));
  }
  if (R1.cols() != spec.d) {
    throw StructuralError("R1 reads R^" + std::to_string(R1.cols()) + ", schedule works in R^" +
                          std::to_string(spec.d));
  }
  const ActivationFlow h = activation_as_flow(spec.slope_a);
  DoubleWidthSystem system = build_double_width(spec);
  const Matrix S = system.readback.transpose();  // (I, -I)^T, 2d x d
  Matrix lift = (std::exp(-h.tau) / (1.0 + spec.slope_a)) * (S * P1);
  Matrix readout = R1 * system.readback;
  return UapPipeline{std::move(lift), h, std::move(system), std::move(readout), substeps};
}

bool meets_uap_width(int d, int d_x, int d_y) noexcept { return d >= std::max(2 * d_x + 1, d_y); }

}  // namespace nflow
