#pragma once

#include <string>
#include <vector>

#include "nflow/core.hpp"
#include "nflow/network.hpp"

namespace nflow {

/// Orthonormal input (eta) and output (xi) bases on a periodic grid, stored
/// as rows of k x N and m x N matrices. Inner products use mean quadrature.
class BasisFrame {
 public:
  BasisFrame(ChannelKind grid, Matrix input_basis, Matrix output_basis);

  /// Real Fourier functions on [0,1): 1, sqrt2 cos(2 pi x), sqrt2 sin(2 pi x),
  /// sqrt2 cos(4 pi x), ... truncated to k (input) and m (output) entries.
  static BasisFrame fourier(int n, int k, int m);

  const ChannelKind& grid() const noexcept { return grid_; }
  const Matrix& input_basis() const noexcept { return input_; }
  const Matrix& output_basis() const noexcept { return output_; }
  Eigen::Index k() const noexcept { return input_.rows(); }
  Eigen::Index m() const noexcept { return output_.rows(); }
  bool is_fourier() const noexcept { return fourier_; }

 private:
  ChannelKind grid_;
  Matrix input_;
  Matrix output_;
  bool fourier_ = false;
};

/// Grid inner product <u, v> = mean(u v).
double grid_inner(const Vector& u, const Vector& v);
double grid_l2_norm(const Vector& v);

/// Largest deviation of the Gram matrix (mean quadrature) from the identity.
double gram_deviation(const Matrix& basis);

/// Coefficients <v, eta_j>.
Vector encode(const BasisFrame& frame, const Vector& v);
/// Coefficients of several functions at once; columns are functions.
Matrix encode_columns(const BasisFrame& frame, const Matrix& functions);
/// Coefficients against the output basis, used to project targets.
Vector encode_output(const BasisFrame& frame, const Vector& u);
/// Synthesis sum_i u_i xi_i.
Vector decode(const BasisFrame& frame, const Vector& u);

/// sup over samples of the grid L2 norm of v - sum_j <v, eta_j> eta_j.
double truncation_error(const BasisFrame& frame, const std::vector<Vector>& samples);

struct OperatorModel {
  OperatorModel(BasisFrame frame, Network core, double coefficient_bound = 0.0);

  BasisFrame frame;
  Network core;
  /// sup |<v, eta_j>| over the training inputs.
  double coefficient_bound;
};

/// decode(frame, forward(core, encode(frame, v))).
Vector operator_forward(const OperatorModel& model, const Vector& v);

std::string save(const OperatorModel& model);
OperatorModel load_operator(const std::string& document);

}  // namespace nflow
