#include "nflow/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <exception>
#include <mutex>

#include "nflow/flow.hpp"

namespace nflow::kernels {

namespace {

/// Lag indexing on a periodic row-major grid.
class LagTable {
 public:
  explicit LagTable(const ChannelKind& g) : n_(g.n()), dims_(g.dims()), coords_() {
    const Eigen::Index N = g.points();
    coords_.resize(static_cast<std::size_t>(N * dims_));
    for (Eigen::Index p = 0; p < N; ++p) {
      Eigen::Index rem = p;
      for (int d = dims_ - 1; d >= 0; --d) {
        coords_[static_cast<std::size_t>(p * dims_ + d)] = static_cast<int>(rem % n_);
        rem /= n_;
      }
    }
  }

  /// Point x - l, with l read as a lag index.
  Eigen::Index minus(Eigen::Index x, Eigen::Index l) const noexcept {
    Eigen::Index out = 0;
    const int* cx = &coords_[static_cast<std::size_t>(x * dims_)];
    const int* cl = &coords_[static_cast<std::size_t>(l * dims_)];
    for (int d = 0; d < dims_; ++d) {
      int diff = cx[d] - cl[d];
      if (diff < 0) diff += n_;
      out = out * n_ + diff;
    }
    return out;
  }

 private:
  int n_;
  int dims_;
  std::vector<int> coords_;
};

/// One output sample of every channel at grid point x.
void conv_point(const ConvKernel& k, const Matrix& z, const Vector& means, const LagTable& lags, Eigen::Index x,
                Matrix& out) {
  const int D = k.channels();
  const Eigen::Index N = z.cols();
  const double inv_n = 1.0 / static_cast<double>(N);
  for (int i = 0; i < D; ++i) {
    double acc = 0.0;
    for (int j = 0; j < D; ++j) {
      const auto& e = k.entry(i, j);
      if (const auto* c = std::get_if<ConstantEntry>(&e)) {
        acc += c->value * means(j);
      } else {
        const Vector& ks = std::get<GridEntry>(e).samples;
        double s = 0.0;
        // Summing in lag order keeps the result exactly shift-equivariant.
        for (Eigen::Index l = 0; l < N; ++l) s += ks(l) * z(j, lags.minus(x, l));
        acc += s * inv_n;
      }
    }
    out(i, x) = acc;
  }
}

/// Sorted summation, so the means do not depend on the point order.
Vector channel_means(const Matrix& z) {
  Vector out(z.rows());
  std::vector<double> row(static_cast<std::size_t>(z.cols()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index p = 0; p < z.cols(); ++p) row[static_cast<std::size_t>(p)] = z(i, p);
    std::sort(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += v;
    out(i) = s / static_cast<double>(z.cols());
  }
  return out;
}

/// Runs body(i) for i in [0, n) in parallel; rethrows the first exception.
template <class Body>
void parallel_for(long n, Body&& body) {
  std::exception_ptr failure;
  std::mutex guard;
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(guard);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

namespace serial {

Matrix conv_apply(const ConvKernel& k, const Matrix& z) {
  const LagTable lags(k.grid());
  const Vector means = channel_means(z);
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index x = 0; x < z.cols(); ++x) conv_point(k, z, means, lags, x, out);
  return out;
}

std::vector<Matrix> forward_batch(const Network& net, const std::vector<Matrix>& inputs) {
  std::vector<Matrix> out;
  out.reserve(inputs.size());
  for (const auto& v : inputs) out.push_back(forward(net, v));
  return out;
}

std::vector<Matrix> forward_latent_batch(const Network& net, const std::vector<Matrix>& states) {
  std::vector<Matrix> out;
  out.reserve(states.size());
  for (const auto& z : states) out.push_back(forward_latent(net, z));
  return out;
}

std::vector<LatentState> integrate_batch(const ParamPath& p, const ActivationFamily& fam,
                                         const std::vector<LatentState>& initial, int substeps) {
  std::vector<LatentState> out;
  out.reserve(initial.size());
  for (const auto& z0 : initial) out.push_back(integrate_reference(FlowProblem(p, z0, fam), substeps));
  return out;
}

}  // namespace serial

namespace omp {

Matrix conv_apply(const ConvKernel& k, const Matrix& z) {
  const LagTable lags(k.grid());
  const Vector means = channel_means(z);
  Matrix out(z.rows(), z.cols());
  const long N = static_cast<long>(z.cols());
  if (k.all_constant()) {
    for (long x = 0; x < N; ++x) conv_point(k, z, means, lags, x, out);
    return out;
  }
#pragma omp parallel for schedule(static)
  for (long x = 0; x < N; ++x) conv_point(k, z, means, lags, x, out);
  return out;
}

std::vector<Matrix> forward_batch(const Network& net, const std::vector<Matrix>& inputs) {
  std::vector<Matrix> out(inputs.size());
  parallel_for(static_cast<long>(inputs.size()),
               [&](long i) { out[static_cast<std::size_t>(i)] = forward(net, inputs[static_cast<std::size_t>(i)]); });
  return out;
}

std::vector<Matrix> forward_latent_batch(const Network& net, const std::vector<Matrix>& states) {
  std::vector<Matrix> out(states.size());
  parallel_for(static_cast<long>(states.size()), [&](long i) {
    out[static_cast<std::size_t>(i)] = forward_latent(net, states[static_cast<std::size_t>(i)]);
  });
  return out;
}

std::vector<LatentState> integrate_batch(const ParamPath& p, const ActivationFamily& fam,
                                         const std::vector<LatentState>& initial, int substeps) {
  std::vector<Matrix> values(initial.size());
  parallel_for(static_cast<long>(initial.size()), [&](long i) {
    const auto& z0 = initial[static_cast<std::size_t>(i)];
    values[static_cast<std::size_t>(i)] = integrate_reference(FlowProblem(p, z0, fam), substeps).values();
  });
  std::vector<LatentState> out;
  out.reserve(initial.size());
  for (std::size_t i = 0; i < initial.size(); ++i) out.emplace_back(initial[i].kind(), std::move(values[i]));
  return out;
}

}  // namespace omp

int max_threads() { return omp_get_max_threads(); }

}  // namespace nflow::kernels
