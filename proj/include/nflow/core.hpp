#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <utility>
#include <vector>

#include "nflow/errors.hpp"

namespace nflow {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Parameterized leaky ReLU: t for t >= 0, a*t for t < 0.
struct ActivationFamily {
  double slope_a = 0.0;

  double operator()(double t) const noexcept { return t >= 0.0 ? t : slope_a * t; }
  /// Slope used by reverse-mode passes; the kink takes the positive branch.
  double derivative(double t) const noexcept { return t >= 0.0 ? 1.0 : slope_a; }
  double lipschitz() const noexcept;
  bool is_identity() const noexcept { return slope_a == 1.0; }
};

/// Whether each latent channel is a scalar or a field on a uniform periodic
/// grid over the unit cube [0,1)^dims with n samples per dimension.
class ChannelKind {
 public:
  enum class Tag { Scalar, Grid };

  static ChannelKind scalar() { return ChannelKind(Tag::Scalar, 1, 0); }
  static ChannelKind grid(int n, int dims);

  Tag tag() const noexcept { return tag_; }
  bool is_grid() const noexcept { return tag_ == Tag::Grid; }
  int n() const noexcept { return n_; }
  int dims() const noexcept { return dims_; }
  /// Samples per channel (n^dims for grids, 1 for scalars).
  Eigen::Index points() const noexcept { return points_; }

  friend bool operator==(const ChannelKind&, const ChannelKind&) = default;

 private:
  ChannelKind(Tag tag, int n, int dims);

  Tag tag_;
  int n_;
  int dims_;
  Eigen::Index points_;
};

/// D latent channels sharing one ChannelKind. Values are stored as a
/// D x points matrix; row i holds channel i.
class LatentState {
 public:
  LatentState(ChannelKind kind, Matrix values);

  /// Scalar-channel state from a D-vector.
  static LatentState scalars(const Vector& values);
  /// Every channel set to the constant field with the given value.
  static LatentState constant_fields(ChannelKind kind, const Vector& values);

  const ChannelKind& kind() const noexcept { return kind_; }
  const Matrix& values() const noexcept { return values_; }
  Eigen::Index channels() const noexcept { return values_.rows(); }
  Eigen::Index points() const noexcept { return values_.cols(); }

 private:
  ChannelKind kind_;
  Matrix values_;
};

struct NormReport {
  double sup_channelwise = 0.0;
  double sup_space_time = 0.0;
  double param_sup = 0.0;
};

LatentState activate(const ActivationFamily& fam, const LatentState& s);
Matrix activate(const ActivationFamily& fam, const Matrix& values);

/// Fills the two state norms; for a single time slice they coincide.
NormReport sup_norms(const LatentState& s);

/// (sigma_a(t) - sigma_a(-t), (1 + a) t).
std::pair<double, double> leaky_relu_identity_check(const ActivationFamily& fam, double t);

/// Operator norm induced by the vector sup norm: max absolute row sum.
double row_sum_norm(const Matrix& m);

/// Adds a bias that is either one value per channel (D x 1, broadcast over
/// the grid) or a full field (D x points).
void add_bias(Matrix& values, const Matrix& bias);

bool all_finite(const Matrix& m);

}  // namespace nflow
