#pragma once

#include <variant>
#include <vector>

#include "nflow/core.hpp"

namespace nflow {

/// Kernel that is the same value at every lag.
struct ConstantEntry {
  double value = 0.0;
};

/// Kernel sampled at every lag of the periodic grid. Lags use the same
/// row-major multi-index as grid samples.
struct GridEntry {
  Vector samples;
};

using KernelEntry = std::variant<ConstantEntry, GridEntry>;

/// D x D periodic convolution kernels, one per (output, input) channel pair.
/// Applied with mean quadrature:
///   out_i(x) = sum_j (1/N) sum_y K_ij(x - y) z_j(y).
class ConvKernel {
 public:
  ConvKernel(ChannelKind grid, int channels, std::vector<KernelEntry> entries);

  static ConvKernel constant(ChannelKind grid, const Matrix& c);
  static ConvKernel zero(ChannelKind grid, int channels);

  const ChannelKind& grid() const noexcept { return grid_; }
  int channels() const noexcept { return channels_; }
  const KernelEntry& entry(int i, int j) const { return entries_[static_cast<std::size_t>(i * channels_ + j)]; }
  const std::vector<KernelEntry>& entries() const noexcept { return entries_; }

  bool all_constant() const noexcept;
  /// Constant values as a matrix; only valid when all_constant().
  Matrix constant_matrix() const;

  ConvKernel scaled(double factor) const;
  /// Entrywise sum; constant+constant stays constant, any grid entry
  /// promotes the pair to full-grid samples.
  ConvKernel plus(const ConvKernel& other) const;

  /// Operator norm induced by the sup norm: max_i sum_j mean_y |K_ij(y)|.
  double operator_norm() const;
  double max_abs() const;

 private:
  ChannelKind grid_;
  int channels_;
  std::vector<KernelEntry> entries_;
};

/// Discrete periodic convolution of every channel pair.
LatentState conv_apply(const ConvKernel& k, const LatentState& s);
Matrix conv_apply(const ConvKernel& k, const Matrix& values);

/// Constant kernels c_ij = W_ij / |Omega| with |Omega| = 1, which reproduce
/// dense channel mixing exactly on constant fields.
ConvKernel emulate_dense(const Matrix& w, ChannelKind grid);

/// Cyclic shift of every channel by the given per-dimension offsets.
LatentState cyclic_shift(const LatentState& s, const std::vector<int>& offsets);

/// True when every channel is a constant field (bitwise).
bool is_constant_fields(const LatentState& s);

}  // namespace nflow
