#pragma once

#include <string>
#include <vector>

#include "nflow/core.hpp"
#include "nflow/params.hpp"

namespace nflow {

/// skip * z + coupling(z).
struct LinearMap {
  double skip = 0.0;
  Coupling coupling = Matrix();

  Matrix apply(const Matrix& z) const;
  int channels() const { return coupling_channels(coupling); }
};

enum class LayerKind {
  Residual,        ///< z + scale * sigma_slope(A z + b)
  PlainActivated,  ///< sigma_slope(scale * (A z + b))
  Affine,          ///< A z + b
};

const char* to_string(LayerKind k) noexcept;

struct Layer {
  LayerKind kind = LayerKind::Affine;
  LinearMap linear;
  Matrix bias;
  /// Residual: the step dt. PlainActivated: 1 / (1 - dt alpha).
  double scale = 1.0;
  /// Residual: the family slope a. PlainActivated: the solved slope gamma.
  double slope = 1.0;

  Matrix apply(const Matrix& z) const;
};

enum class NetworkStructure { Resnet, Plain };

const char* to_string(NetworkStructure s) noexcept;

/// Finite-depth model z^0 = P v, z^l = layer_l(z^{l-1}), u = R z^L. Lift and
/// readout mix channels pointwise.
class Network {
 public:
  Network(NetworkStructure structure, ChannelKind kind, double activation_a, Matrix lift,
          std::vector<Layer> layers, Matrix readout);

  /// Identity lift and readout around the given layers.
  static Network latent(NetworkStructure structure, ChannelKind kind, int channels, double activation_a,
                        std::vector<Layer> layers);

  NetworkStructure structure() const noexcept { return structure_; }
  const ChannelKind& kind() const noexcept { return kind_; }
  int channels() const noexcept { return channels_; }
  double activation_a() const noexcept { return activation_a_; }
  const Matrix& lift() const noexcept { return lift_; }
  const Matrix& readout() const noexcept { return readout_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  Eigen::Index input_dim() const noexcept { return lift_.cols(); }
  Eigen::Index output_dim() const noexcept { return readout_.rows(); }

  Network with_lift_readout(Matrix lift, Matrix readout) const;
  Network with_layers(std::vector<Layer> layers) const;

 private:
  NetworkStructure structure_;
  ChannelKind kind_;
  int channels_;
  double activation_a_;
  Matrix lift_;
  std::vector<Layer> layers_;
  Matrix readout_;
};

/// Evaluates the network on d_in x points input (one column per grid point;
/// scalar networks accept several probes as columns).
Matrix forward(const Network& net, const Matrix& v);

/// Latent trajectory without lift/readout: returns z^L for z^0.
Matrix forward_latent(const Network& net, const Matrix& z0);

/// Versioned JSON model document; numbers use shortest round-trip form.
std::string save(const Network& net);
Network load(const std::string& document);

inline constexpr const char* kModelFormatVersion = "1";

}  // namespace nflow
