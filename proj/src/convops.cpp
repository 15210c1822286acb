#include "nflow/convops.hpp"

#include <cmath>
#include <string>

#include "nflow/kernels.hpp"

namespace nflow {

namespace {

Vector to_samples(const KernelEntry& e, Eigen::Index points) {
  if (const auto* c = std::get_if<ConstantEntry>(&e)) return Vector::Constant(points, c->value);
  return std::get<GridEntry>(e).samples;
}

}  // namespace

ConvKernel::ConvKernel(ChannelKind grid, int channels, std::vector<KernelEntry> entries)
    : grid_(grid), channels_(channels), entries_(std::move(entries)) {
  if (!grid_.is_grid()) throw StructuralError("convolution kernels need a grid channel kind");
  if (channels_ < 1) throw StructuralError("convolution kernel needs at least one channel");
  if (entries_.size() != static_cast<std::size_t>(channels_) * static_cast<std::size_t>(channels_)) {
    throw StructuralError("convolution kernel needs D*D = " + std::to_string(channels_ * channels_) +
                          " entries, got " + std::to_string(entries_.size()));
  }
  for (const auto& e : entries_) {
    if (const auto* g = std::get_if<GridEntry>(&e)) {
      if (g->samples.size() != grid_.points()) {
        throw StructuralError("kernel resolution (" + std::to_string(g->samples.size()) +
                              " samples) does not match the grid (" +
                              std::to_string(grid_.points()) + ")");
      }
    }
  }
}

ConvKernel ConvKernel::constant(ChannelKind grid, const Matrix& c) {
  if (c.rows() != c.cols()) throw StructuralError("constant kernel matrix must be square");
  std::vector<KernelEntry> entries;
  entries.reserve(static_cast<std::size_t>(c.size()));
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j) entries.emplace_back(ConstantEntry{c(i, j)});
  return ConvKernel(grid, static_cast<int>(c.rows()), std::move(entries));
}

ConvKernel ConvKernel::zero(ChannelKind grid, int channels) {
  return constant(grid, Matrix::Zero(channels, channels));
}

bool ConvKernel::all_constant() const noexcept {
  for (const auto& e : entries_)
    if (!std::holds_alternative<ConstantEntry>(e)) return false;
  return true;
}

Matrix ConvKernel::constant_matrix() const {
  if (!all_constant()) throw StructuralError("kernel has full-grid entries");
  Matrix c(channels_, channels_);
  for (int i = 0; i < channels_; ++i)
    for (int j = 0; j < channels_; ++j) c(i, j) = std::get<ConstantEntry>(entry(i, j)).value;
  return c;
}

ConvKernel ConvKernel::scaled(double factor) const {
  std::vector<KernelEntry> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (const auto* c = std::get_if<ConstantEntry>(&e)) {
      out.emplace_back(ConstantEntry{factor * c->value});
    } else {
      out.emplace_back(GridEntry{factor * std::get<GridEntry>(e).samples});
    }
  }
  return ConvKernel(grid_, channels_, std::move(out));
}

ConvKernel ConvKernel::plus(const ConvKernel& other) const {
  if (other.channels_ != channels_ || !(other.grid_ == grid_)) {
    throw StructuralError("cannot add convolution kernels of different shapes");
  }
  std::vector<KernelEntry> out;
  out.reserve(entries_.size());
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const auto* a = std::get_if<ConstantEntry>(&entries_[k]);
    const auto* b = std::get_if<ConstantEntry>(&other.entries_[k]);
    if (a && b) {
      out.emplace_back(ConstantEntry{a->value + b->value});
    } else {
      out.emplace_back(GridEntry{to_samples(entries_[k], grid_.points()) +
                                 to_samples(other.entries_[k], grid_.points())});
    }
  }
  return ConvKernel(grid_, channels_, std::move(out));
}

double ConvKernel::operator_norm() const {
  double best = 0.0;
  for (int i = 0; i < channels_; ++i) {
    double row = 0.0;
    for (int j = 0; j < channels_; ++j) {
      const auto& e = entry(i, j);
      if (const auto* c = std::get_if<ConstantEntry>(&e)) {
        row += std::abs(c->value);
      } else {
        row += std::get<GridEntry>(e).samples.cwiseAbs().mean();
      }
    }
    best = std::max(best, row);
  }
  return best;
}

double ConvKernel::max_abs() const {
  double best = 0.0;
  for (const auto& e : entries_) {
    if (const auto* c = std::get_if<ConstantEntry>(&e)) {
      best = std::max(best, std::abs(c->value));
    } else {
      best = std::max(best, std::get<GridEntry>(e).samples.cwiseAbs().maxCoeff());
    }
  }
  return best;
}

Matrix conv_apply(const ConvKernel& k, const Matrix& values) {
  if (values.rows() != k.channels()) {
    throw StructuralError("state has " + std::to_string(values.rows()) +
                          " channels, kernel expects " + std::to_string(k.channels()));
  }
  if (values.cols() != k.grid().points()) {
    throw StructuralError("state resolution does not match the kernel resolution");
  }
  return kernels::omp::conv_apply(k, values);
}

LatentState conv_apply(const ConvKernel& k, const LatentState& s) {
  if (!(s.kind() == k.grid())) throw StructuralError("state grid does not match the kernel grid");
  return LatentState(s.kind(), conv_apply(k, s.values()));
}

ConvKernel emulate_dense(const Matrix& w, ChannelKind grid) {
  // |Omega| = 1 on the unit cube, so c_ij = W_ij.
  return ConvKernel::constant(grid, w);
}

LatentState cyclic_shift(const LatentState& s, const std::vector<int>& offsets) {
  const auto& kind = s.kind();
  if (!kind.is_grid()) throw StructuralError("cyclic shift needs grid channels");
  if (offsets.size() != static_cast<std::size_t>(kind.dims())) {
    throw StructuralError("shift needs one offset per grid dimension");
  }
  const int n = kind.n();
  const int dims = kind.dims();
  Matrix out(s.values().rows(), s.values().cols());
  std::vector<int> idx(static_cast<std::size_t>(dims), 0);
  for (Eigen::Index p = 0; p < kind.points(); ++p) {
    // Decode p (row-major) and map to the shifted target point.
    Eigen::Index rem = p;
    for (int d = dims - 1; d >= 0; --d) {
      idx[static_cast<std::size_t>(d)] = static_cast<int>(rem % n);
      rem /= n;
    }
    Eigen::Index q = 0;
    for (int d = 0; d < dims; ++d) {
      int shifted = ((idx[static_cast<std::size_t>(d)] + offsets[static_cast<std::size_t>(d)]) % n + n) % n;
      q = q * n + shifted;
    }
    out.col(q) = s.values().col(p);
  }
  return LatentState(kind, std::move(out));
}

bool is_constant_fields(const LatentState& s) {
  const Matrix& v = s.values();
  for (Eigen::Index i = 0; i < v.rows(); ++i)
    for (Eigen::Index p = 1; p < v.cols(); ++p)
      if (v(i, p) != v(i, 0)) return false;
  return true;
}

}  // namespace nflow
