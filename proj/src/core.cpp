#include "nflow/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nflow {

double ActivationFamily::lipschitz() const noexcept {
  return std::max(1.0, std::abs(slope_a));
}

ChannelKind::ChannelKind(Tag tag, int n, int dims) : tag_(tag), n_(n), dims_(dims), points_(1) {
  for (int d = 0; d < dims; ++d) points_ *= n;
}

ChannelKind ChannelKind::grid(int n, int dims) {
  if (n < 1) throw StructuralError("grid resolution must be at least 1, got " + std::to_string(n));
  if (dims < 1) throw StructuralError("grid dimension must be at least 1, got " + std::to_string(dims));
  return ChannelKind(Tag::Grid, n, dims);
}

LatentState::LatentState(ChannelKind kind, Matrix values) : kind_(kind), values_(std::move(values)) {
  if (values_.rows() < 1) throw StructuralError("latent state needs at least one channel");
  if (values_.cols() != kind_.points()) {
    throw StructuralError("latent state has " + std::to_string(values_.cols()) +
                          " samples per channel, channel kind expects " +
                          std::to_string(kind_.points()));
  }
}

LatentState LatentState::scalars(const Vector& values) {
  return LatentState(ChannelKind::scalar(), Matrix(values));
}

LatentState LatentState::constant_fields(ChannelKind kind, const Vector& values) {
  Matrix m = values.replicate(1, kind.points());
  return LatentState(kind, std::move(m));
}

Matrix activate(const ActivationFamily& fam, const Matrix& values) {
  return values.unaryExpr([fam](double t) { return fam(t); });
}

LatentState activate(const ActivationFamily& fam, const LatentState& s) {
  return LatentState(s.kind(), activate(fam, s.values()));
}

NormReport sup_norms(const LatentState& s) {
  NormReport r;
  r.sup_channelwise = s.values().cwiseAbs().maxCoeff();
  r.sup_space_time = r.sup_channelwise;
  return r;
}

std::pair<double, double> leaky_relu_identity_check(const ActivationFamily& fam, double t) {
  return {fam(t) - fam(-t), (1.0 + fam.slope_a) * t};
}

double row_sum_norm(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

void add_bias(Matrix& values, const Matrix& bias) {
  if (bias.rows() != values.rows()) {
    throw StructuralError("bias has " + std::to_string(bias.rows()) + " channels, state has " +
                          std::to_string(values.rows()));
  }
  if (bias.cols() == 1) {
    values.colwise() += bias.col(0);
  } else if (bias.cols() == values.cols()) {
    values += bias;
  } else {
    throw StructuralError("bias field has " + std::to_string(bias.cols()) +
                          " samples, state has " + std::to_string(values.cols()));
  }
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace nflow
