#include "nflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nflow {

FlowProblem::FlowProblem(ParamPath path_, LatentState initial_, ActivationFamily activation_)
    : path(std::move(path_)), initial(std::move(initial_)), activation(activation_) {
  if (initial.channels() != path.channels()) {
    throw StructuralError("initial state has " + std::to_string(initial.channels()) +
                          " channels, path has " + std::to_string(path.channels()));
  }
  for (const auto& seg : path.segments()) {
    if (const auto* k = std::get_if<ConvKernel>(&seg.W); k && !(k->grid() == initial.kind())) {
      throw StructuralError("convolution kernel grid does not match the initial state");
    }
    if (seg.b.cols() != 1 && seg.b.cols() != initial.points()) {
      throw StructuralError("bias field resolution does not match the initial state");
    }
  }
}

Matrix rhs(const Matrix& z, const ParamSegment& seg, Structure structure, const ActivationFamily& fam) {
  Matrix out = apply_coupling(seg.W, z);
  add_bias(out, seg.b);
  if (structure == Structure::Composition) return activate(fam, out);
  if (seg.alpha != 0.0) out += seg.alpha * activate(fam, z);
  return out;
}

LatentState rhs(const LatentState& s, const ParamSegment& seg, Structure structure,
                const ActivationFamily& fam) {
  return LatentState(s.kind(), rhs(s.values(), seg, structure, fam));
}

LatentState integrate_reference(const FlowProblem& fp, int substeps_per_segment, const StepObserver& observer) {
  if (substeps_per_segment < 1) throw DomainError("substeps per segment must be at least 1");
  const Structure st = fp.path.structure();
  Matrix z = fp.initial.values();
  double t0 = 0.0;
  for (std::size_t s = 0; s < fp.path.size(); ++s) {
    const auto& seg = fp.path.segment(s);
    const double h = seg.duration / substeps_per_segment;
    for (int k = 0; k < substeps_per_segment; ++k) {
      const Matrix k1 = rhs(z, seg, st, fp.activation);
      const Matrix k2 = rhs(z + (0.5 * h) * k1, seg, st, fp.activation);
      const Matrix k3 = rhs(z + (0.5 * h) * k2, seg, st, fp.activation);
      const Matrix k4 = rhs(z + h * k3, seg, st, fp.activation);
      z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      if (!z.allFinite()) {
        throw DivergenceError("non-finite state in segment " + std::to_string(s), s);
      }
      if (observer) {
        const double t = k + 1 == substeps_per_segment ? t0 + seg.duration : t0 + (k + 1) * h;
        observer(t, s, z);
      }
    }
    t0 += seg.duration;
  }
  return LatentState(fp.initial.kind(), std::move(z));
}

TracedSolution integrate_traced(const FlowProblem& fp, int substeps_per_segment) {
  double sup = fp.initial.values().cwiseAbs().maxCoeff();
  auto final_state = integrate_reference(fp, substeps_per_segment, [&sup](double, std::size_t, const Matrix& z) {
    sup = std::max(sup, z.cwiseAbs().maxCoeff());
  });
  return {std::move(final_state), sup};
}

double lipschitz_state(const ParamSegment& seg, Structure structure, const ActivationFamily& fam) {
  const double w = coupling_norm(seg.W);
  if (structure == Structure::Composition) return fam.lipschitz() * w;
  return w + std::abs(seg.alpha) * fam.lipschitz();
}

StabilityBound gronwall_bound(const ParamPath& p1, const ParamPath& p2, double state_sup,
                              const ActivationFamily& fam) {
  if (p1.structure() != p2.structure()) throw StructuralError("paths have different structures");
  if (std::abs(p1.total_time() - p2.total_time()) > 1e-12 * std::max(p1.total_time(), p2.total_time())) {
    throw StructuralError("paths have different total times");
  }
  if (!(state_sup >= 0.0)) throw DomainError("state sup norm must be nonnegative");

  StabilityBound r;
  for (const auto& seg : p1.segments()) {
    r.lipschitz_L = std::max(r.lipschitz_L, lipschitz_state(seg, p1.structure(), fam));
  }
  const double act = fam.lipschitz();
  if (p1.structure() == Structure::Composition) {
    r.param_M = act * (state_sup + 1.0);
  } else {
    r.param_M = state_sup + 1.0 + act * state_sup;
  }
  r.param_distance = path_distance(p1, p2);
  const double T = p1.total_time();
  r.bound = r.param_M * T * std::exp(r.lipschitz_L * T) * r.param_distance;
  return r;
}

}  // namespace nflow
