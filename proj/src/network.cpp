#include "nflow/network.hpp"

#include <string>

namespace nflow {

const char* to_string(LayerKind k) noexcept {
  switch (k) {
    case LayerKind::Residual: return "residual";
    case LayerKind::PlainActivated: return "plain_activated";
    case LayerKind::Affine: return "affine";
  }
  return "?";
}

const char* to_string(NetworkStructure s) noexcept {
  return s == NetworkStructure::Resnet ? "resnet" : "plain";
}

Matrix LinearMap::apply(const Matrix& z) const {
  Matrix out = apply_coupling(coupling, z);
  if (skip != 0.0) out += skip * z;
  return out;
}

Matrix Layer::apply(const Matrix& z) const {
  Matrix pre = linear.apply(z);
  add_bias(pre, bias);
  switch (kind) {
    case LayerKind::Residual: {
      const ActivationFamily fam{slope};
      return z + scale * activate(fam, pre);
    }
    case LayerKind::PlainActivated: {
      const ActivationFamily fam{slope};
      return activate(fam, scale * pre);
    }
    case LayerKind::Affine:
      return pre;
  }
  return pre;
}

Network::Network(NetworkStructure structure, ChannelKind kind, double activation_a, Matrix lift,
                 std::vector<Layer> layers, Matrix readout)
    : structure_(structure), kind_(kind), channels_(static_cast<int>(lift.rows())),
      activation_a_(activation_a), lift_(std::move(lift)), layers_(std::move(layers)),
      readout_(std::move(readout)) {
  if (channels_ < 1) throw StructuralError("network needs at least one latent channel");
  if (lift_.cols() < 1) throw StructuralError("lift needs at least one input");
  if (readout_.cols() != channels_) {
    throw StructuralError("readout sources " + std::to_string(readout_.cols()) + " channels, lift targets " +
                          std::to_string(channels_));
  }
  if (readout_.rows() < 1) throw StructuralError("readout needs at least one output");
  if (!lift_.allFinite() || !readout_.allFinite()) throw StructuralError("lift/readout have non-finite entries");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const std::string where = "layer " + std::to_string(l) + ": ";
    if (layer.linear.channels() != channels_) throw StructuralError(where + "coupling is not D x D");
    if (const auto* m = std::get_if<Matrix>(&layer.linear.coupling); m && m->cols() != channels_) {
      throw StructuralError(where + "coupling is not D x D");
    }
    if (const auto* k = std::get_if<ConvKernel>(&layer.linear.coupling); k && !(k->grid() == kind_)) {
      throw StructuralError(where + "kernel grid does not match the network channel kind");
    }
    if (layer.bias.rows() != channels_ || (layer.bias.cols() != 1 && layer.bias.cols() != kind_.points())) {
      throw StructuralError(where + "bias shape mismatch");
    }
    if (!layer.bias.allFinite() || !std::isfinite(layer.scale) || !std::isfinite(layer.slope) ||
        !std::isfinite(layer.linear.skip)) {
      throw StructuralError(where + "non-finite parameters");
    }
    if (const auto* m = std::get_if<Matrix>(&layer.linear.coupling); m && !m->allFinite()) {
      throw StructuralError(where + "non-finite coupling");
    }
  }
}

Network Network::latent(NetworkStructure structure, ChannelKind kind, int channels, double activation_a,
                        std::vector<Layer> layers) {
  return Network(structure, kind, activation_a, Matrix::Identity(channels, channels), std::move(layers),
                 Matrix::Identity(channels, channels));
}

Network Network::with_lift_readout(Matrix lift, Matrix readout) const {
  return Network(structure_, kind_, activation_a_, std::move(lift), layers_, std::move(readout));
}

Network Network::with_layers(std::vector<Layer> layers) const {
  return Network(structure_, kind_, activation_a_, lift_, std::move(layers), readout_);
}

Matrix forward_latent(const Network& net, const Matrix& z0) {
  Matrix z = z0;
  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    z = layers[l].apply(z);
    if (!z.allFinite()) throw NumericError("non-finite activation after layer " + std::to_string(l), l);
  }
  return z;
}

Matrix forward(const Network& net, const Matrix& v) {
  if (v.rows() != net.input_dim()) {
    throw StructuralError("input has " + std::to_string(v.rows()) + " channels, lift expects " +
                          std::to_string(net.input_dim()));
  }
  if (net.kind().is_grid() && v.cols() != net.kind().points()) {
    throw StructuralError("input grid has " + std::to_string(v.cols()) + " samples, network expects " +
                          std::to_string(net.kind().points()));
  }
  const Matrix z0 = net.lift() * v;
  return net.readout() * forward_latent(net, z0);
}

}  // namespace nflow
