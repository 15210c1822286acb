#pragma once

#include <functional>

#include "nflow/core.hpp"
#include "nflow/params.hpp"

namespace nflow {

/// Initial-value problem dz/dt = Phi_theta(t)(z), z(0) = initial.
struct FlowProblem {
  FlowProblem(ParamPath path, LatentState initial, ActivationFamily activation);

  ParamPath path;
  LatentState initial;
  ActivationFamily activation;
};

/// Right-hand side of either structure for one constant segment:
///   composition: sigma_a(W z + b)
///   separation:  W z + b + alpha sigma_a(z)
Matrix rhs(const Matrix& z, const ParamSegment& seg, Structure structure, const ActivationFamily& fam);
LatentState rhs(const LatentState& s, const ParamSegment& seg, Structure structure,
                const ActivationFamily& fam);

/// Called after every substep with the time, active segment and state.
using StepObserver = std::function<void(double t, std::size_t segment, const Matrix& z)>;

/// Fixed-step classical RK4 inside each constant segment; segment
/// boundaries are hit exactly.
LatentState integrate_reference(const FlowProblem& fp, int substeps_per_segment,
                                const StepObserver& observer = {});

/// Final state together with the sup norm over every visited substep.
struct TracedSolution {
  LatentState final_state;
  double trajectory_sup;
};
TracedSolution integrate_traced(const FlowProblem& fp, int substeps_per_segment);

struct StabilityBound {
  double lipschitz_L = 0.0;
  double param_M = 0.0;
  double param_distance = 0.0;
  double bound = 0.0;
};

/// State Lipschitz constant of one segment's right-hand side.
double lipschitz_state(const ParamSegment& seg, Structure structure, const ActivationFamily& fam);

/// Parameter-stability bound M T e^{LT} ||theta1 - theta2||. L is taken over
/// p1's segments; state_sup bounds ||z||_{inf,inf} on both trajectories.
StabilityBound gronwall_bound(const ParamPath& p1, const ParamPath& p2, double state_sup,
                              const ActivationFamily& fam);

}  // namespace nflow
