#pragma once

#include <utility>
#include <vector>

#include "nflow/core.hpp"
#include "nflow/flow.hpp"
#include "nflow/params.hpp"

namespace nflow {

/// One constant piece of the signed target dynamics
///   dz/dt = diag(signs) sigma_a(A z + b).
struct SignedSegment {
  double duration = 0.0;
  std::vector<int> signs;  ///< entries in {+1, -1}
  Matrix A;                ///< d x d
  Vector b;                ///< d
};

struct DoubleWidthSpec {
  int d = 0;
  double slope_a = 0.0;
  std::vector<SignedSegment> schedule;
};

/// Composition flow on R^{2d} whose readback (I_d, -I_d) reproduces the
/// signed target dynamics. State layout: first d entries carry the
/// positive part p, last d entries the negative part q, and z = p - q.
struct DoubleWidthSystem {
  ParamPath path;
  ActivationFamily activation;
  Matrix readback;  ///< d x 2d, (I_d, -I_d)

  /// (1/(1+a)) (sigma_a(z0), sigma_a(-z0)).
  Vector lift(const Vector& z0) const;
  Vector read(const Vector& zhat) const { return readback * zhat; }
};

DoubleWidthSystem build_double_width(const DoubleWidthSpec& spec);

/// Right-hand side of the signed target dynamics for one segment.
Vector signed_target_rhs(const SignedSegment& seg, const ActivationFamily& fam, const Vector& z);

/// Time-tau flow of dz/dt = sigma_a(z) with tau = ln(a)/(a-1), so that
/// H^tau(e^{-tau} w) = sigma_a(w).
struct ActivationFlow {
  double slope_a = 0.0;
  double tau = 0.0;

  /// Closed-form time-t flow: e^t z for z > 0, e^{a t} z for z < 0.
  double flow(double z, double t) const noexcept;
  double apply(double z) const noexcept { return flow(z, tau); }
  /// (H^tau(e^{-tau} w), sigma_a(w)).
  std::pair<double, double> check(double w) const noexcept;
};

ActivationFlow activation_as_flow(double a);

/// Scaled lift -> H^tau -> double-width flow G^T -> readback -> R1.
struct UapPipeline {
  Matrix lift;     ///< 2d x d_x, (e^{-tau}/(1+a)) S P1
  ActivationFlow activation_flow;
  DoubleWidthSystem system;
  Matrix readout;  ///< d_y x 2d, R1 S^T
  int substeps = 256;

  Vector forward(const Vector& x) const;
  /// Total time T + tau.
  double total_time() const noexcept { return system.path.total_time() + activation_flow.tau; }
};

UapPipeline assemble_uap_skeleton(const DoubleWidthSpec& spec, const Matrix& P1, const Matrix& R1,
                                  int substeps = 256);

/// Width condition d >= max(2 d_x + 1, d_y) under which the target dynamics
/// are known to be universal. Informational only.
bool meets_uap_width(int d, int d_x, int d_y) noexcept;

}  // namespace nflow
