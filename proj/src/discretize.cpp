#include "nflow/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nflow/flow.hpp"
#include "nflow/kernels.hpp"

namespace nflow {

SolvedActivation solve_implicit_step(const ActivationFamily& fam, double dt, double alpha) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive, got " + std::to_string(dt));
  const double pos = 1.0 - dt * alpha;
  const double neg = 1.0 - fam.slope_a * dt * alpha;
  if (!(pos > 0.0)) {
    throw DomainError("invertibility window violated: 1 - dt*alpha = " + std::to_string(pos) + " <= 0");
  }
  if (!(neg > 0.0)) {
    throw DomainError("invertibility window violated: 1 - a*dt*alpha = " + std::to_string(neg) + " <= 0");
  }
  return SolvedActivation{pos / neg, 1.0 / pos};
}

ChannelKind infer_channel_kind(const ParamPath& p) {
  for (const auto& seg : p.segments()) {
    if (const auto* k = std::get_if<ConvKernel>(&seg.W)) return k->grid();
  }
  return ChannelKind::scalar();
}

namespace {

ChannelKind resolve_kind(const ParamPath& p, std::optional<ChannelKind> kind) {
  return kind ? *kind : infer_channel_kind(p);
}

/// I + dt W for dense couplings; skip 1 plus a dt-scaled kernel otherwise.
LinearMap euler_linear_part(const Coupling& w, double dt) {
  if (const auto* m = std::get_if<Matrix>(&w)) {
    Matrix wt = dt * (*m);
    wt.diagonal().array() += 1.0;
    return LinearMap{0.0, std::move(wt)};
  }
  return LinearMap{1.0, std::get<ConvKernel>(w).scaled(dt)};
}

}  // namespace

Network euler_resnet(const ParamPath& p, double dt, const ActivationFamily& fam, std::optional<ChannelKind> kind) {
  if (p.structure() != Structure::Composition) {
    throw StructuralError("explicit Euler compiles composition paths only");
  }
  const auto steps = aligned_steps(p, dt);
  std::vector<Layer> layers;
  for (std::size_t s = 0; s < p.size(); ++s) {
    const auto& seg = p.segment(s);
    Layer layer;
    layer.kind = LayerKind::Residual;
    layer.linear = LinearMap{0.0, seg.W};
    layer.bias = seg.b;
    layer.scale = dt;
    layer.slope = fam.slope_a;
    for (long k = 0; k < steps[s]; ++k) layers.push_back(layer);
  }
  return Network::latent(NetworkStructure::Resnet, resolve_kind(p, kind), p.channels(), fam.slope_a,
                         std::move(layers));
}

Network split_plain(const ParamPath& p, double dt, const ActivationFamily& fam, std::optional<ChannelKind> kind) {
  if (p.structure() != Structure::Separation) {
    throw StructuralError("semi-implicit splitting compiles separation paths only");
  }
  const auto steps = aligned_steps(p, dt);
  std::vector<Layer> layers;
  for (std::size_t s = 0; s < p.size(); ++s) {
    const auto& seg = p.segment(s);
    SolvedActivation solved;
    try {
      solved = solve_implicit_step(fam, dt, seg.alpha);
    } catch (const DomainError& e) {
      throw DomainError("segment " + std::to_string(s) + ": " + e.what());
    }
    Layer layer;
    layer.linear = euler_linear_part(seg.W, dt);
    layer.bias = dt * seg.b;
    if (seg.alpha == 0.0) {
      layer.kind = LayerKind::Affine;
    } else {
      layer.kind = LayerKind::PlainActivated;
      layer.scale = solved.scale;
      layer.slope = solved.gamma;
    }
    for (long k = 0; k < steps[s]; ++k) layers.push_back(layer);
  }
  return Network::latent(NetworkStructure::Plain, resolve_kind(p, kind), p.channels(), fam.slope_a,
                         std::move(layers));
}

Network compile(const ParamPath& p, double dt, const ActivationFamily& fam, std::optional<ChannelKind> kind) {
  return p.structure() == Structure::Composition ? euler_resnet(p, dt, fam, kind) : split_plain(p, dt, fam, kind);
}

Network merge_affine(const Network& net) {
  if (net.structure() != NetworkStructure::Plain) throw StructuralError("affine merging applies to plain networks");
  std::vector<Layer> out;
  for (const auto& layer : net.layers()) {
    const bool mergeable = layer.kind == LayerKind::Affine && is_dense(layer.linear.coupling);
    if (mergeable && !out.empty() && out.back().kind == LayerKind::Affine && is_dense(out.back().linear.coupling)) {
      Layer& prev = out.back();
      // (A2, b2) o (A1, b1) = (A2 A1, A2 b1 + b2)
      Matrix a1 = std::get<Matrix>(prev.linear.coupling);
      if (prev.linear.skip != 0.0) a1.diagonal().array() += prev.linear.skip;
      Matrix a2 = std::get<Matrix>(layer.linear.coupling);
      if (layer.linear.skip != 0.0) a2.diagonal().array() += layer.linear.skip;
      Matrix b = a2 * prev.bias;
      add_bias(b, layer.bias);
      prev.linear = LinearMap{0.0, Matrix(a2 * a1)};
      prev.bias = std::move(b);
    } else {
      out.push_back(layer);
    }
  }
  return net.with_layers(std::move(out));
}

ErrorTable measure_discretization_error(const ParamPath& p, const std::vector<double>& dts,
                                        const ActivationFamily& fam, const std::vector<LatentState>& probes,
                                        int reference_substeps) {
  if (probes.empty()) throw StructuralError("probe set is empty");
  for (std::size_t i = 0; i < dts.size(); ++i) {
    if (!(dts[i] > 0.0)) throw DomainError("time steps must be positive");
    if (i > 0 && !(dts[i] < dts[i - 1])) throw DomainError("time steps must be strictly descending");
  }
  const ChannelKind kind = probes.front().kind();
  std::vector<Matrix> reference;
  reference.reserve(probes.size());
  for (const auto& z0 : probes) {
    reference.push_back(integrate_reference(FlowProblem(p, z0, fam), reference_substeps).values());
  }

  ErrorTable table;
  for (double dt : dts) {
    const auto corrected = time_correct(p, dt);
    const Network net = compile(corrected.path, dt, fam, kind);
    std::vector<Matrix> inputs;
    inputs.reserve(probes.size());
    for (const auto& z0 : probes) inputs.push_back(z0.values());
    const auto outputs = kernels::omp::forward_latent_batch(net, inputs);
    ErrorRow row;
    row.dt = dt;
    row.max_shift = corrected.max_shift;
    row.layers = static_cast<long>(net.layers().size());
    for (std::size_t i = 0; i < probes.size(); ++i) {
      row.sup_error = std::max(row.sup_error, (outputs[i] - reference[i]).cwiseAbs().maxCoeff());
    }
    if (!table.rows.empty() && row.sup_error > 0.0) row.ratio = table.rows.back().sup_error / row.sup_error;
    table.c1_estimate = std::max(table.c1_estimate, row.sup_error / dt);
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace nflow
