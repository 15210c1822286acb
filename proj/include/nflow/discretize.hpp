#pragma once

#include <optional>
#include <vector>

#include "nflow/core.hpp"
#include "nflow/network.hpp"
#include "nflow/params.hpp"

namespace nflow {

/// Closed-form inverse of the nonlinear substep z - dt*alpha*sigma_a(z) = w:
/// z = sigma_gamma(scale * w) with scale = 1/(1 - dt alpha) and
/// gamma = (1 - dt alpha) / (1 - a dt alpha).
struct SolvedActivation {
  double gamma = 1.0;
  double scale = 1.0;

  double apply(double w) const noexcept {
    const double u = scale * w;
    return u >= 0.0 ? u : gamma * u;
  }
};

/// Throws DomainError naming the violated inequality when the step leaves
/// the invertibility window (1 - dt alpha > 0, 1 - a dt alpha > 0).
SolvedActivation solve_implicit_step(const ActivationFamily& fam, double dt, double alpha);

/// Explicit Euler on a composition path: z^l = z^{l-1} + dt sigma_a(W^l z^{l-1} + b^l).
/// The network channel kind defaults to the grid of any convolutional
/// coupling, else scalar.
Network euler_resnet(const ParamPath& p, double dt, const ActivationFamily& fam,
                     std::optional<ChannelKind> kind = std::nullopt);

/// Semi-implicit splitting on a separation path: linear substep
/// (I + dt W) z + dt b, then the solved nonlinear substep. Segments with
/// alpha = 0 become affine layers.
Network split_plain(const ParamPath& p, double dt, const ActivationFamily& fam,
                    std::optional<ChannelKind> kind = std::nullopt);

/// Compiles with the structure-appropriate scheme.
Network compile(const ParamPath& p, double dt, const ActivationFamily& fam,
                std::optional<ChannelKind> kind = std::nullopt);

ChannelKind infer_channel_kind(const ParamPath& p);

/// Composes maximal runs of dense affine layers into single layers.
Network merge_affine(const Network& net);

struct ErrorRow {
  double dt = 0.0;
  double max_shift = 0.0;
  long layers = 0;
  double sup_error = 0.0;
  /// error(previous dt) / error(this dt); 0 for the first row.
  double ratio = 0.0;
};

struct ErrorTable {
  std::vector<ErrorRow> rows;
  /// max over rows of sup_error / dt, the empirical first-order constant.
  double c1_estimate = 0.0;
};

/// For each dt: time-correct, compile, and compare the network against the
/// reference flow of the original path over the probe set.
ErrorTable measure_discretization_error(const ParamPath& p, const std::vector<double>& dts,
                                        const ActivationFamily& fam, const std::vector<LatentState>& probes,
                                        int reference_substeps = 256);

}  // namespace nflow
