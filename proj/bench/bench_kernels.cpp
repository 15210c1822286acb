// Serial reference vs OpenMP kernels.

#include <random>

#include "benchmark/benchmark.h"
#include "nflow/discretize.hpp"
#include "nflow/kernels.hpp"

namespace {

using namespace nflow;

Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

ConvKernel grid_kernel(std::mt19937_64& rng, const ChannelKind& grid, int D) {
  std::vector<KernelEntry> entries;
  for (int e = 0; e < D * D; ++e) entries.emplace_back(GridEntry{random_matrix(rng, grid.points(), 1)});
  return ConvKernel(grid, D, std::move(entries));
}

ParamPath dense_path(std::mt19937_64& rng, int D) {
  std::vector<ParamSegment> segs;
  for (int s = 0; s < 2; ++s)
    segs.push_back(ParamSegment{0.5, random_matrix(rng, D, D, 0.5), random_matrix(rng, D, 1, 0.2), 0.3});
  return ParamPath(Structure::Separation, segs);
}

template <Matrix (*Conv)(const ConvKernel&, const Matrix&)>
void BM_ConvApply(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const ChannelKind grid = ChannelKind::grid(static_cast<int>(state.range(0)), 2);
  const int D = 4;
  const ConvKernel k = grid_kernel(rng, grid, D);
  const Matrix z = random_matrix(rng, D, grid.points());
  for (auto _ : state) benchmark::DoNotOptimize(Conv(k, z));
  state.counters["threads"] = kernels::max_threads();
}
BENCHMARK(BM_ConvApply<kernels::serial::conv_apply>)->Name("conv_apply/serial")->Arg(8)->Arg(16);
BENCHMARK(BM_ConvApply<kernels::omp::conv_apply>)->Name("conv_apply/omp")->Arg(8)->Arg(16);

template <std::vector<Matrix> (*Fwd)(const Network&, const std::vector<Matrix>&)>
void BM_ForwardBatch(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const int D = 16;
  const Network net = split_plain(dense_path(rng, D), 1.0 / 32, ActivationFamily{0.1});
  std::vector<Matrix> inputs;
  for (int b = 0; b < state.range(0); ++b) inputs.push_back(random_matrix(rng, D, 64));
  for (auto _ : state) benchmark::DoNotOptimize(Fwd(net, inputs));
}
BENCHMARK(BM_ForwardBatch<kernels::serial::forward_batch>)->Name("forward_batch/serial")->Arg(16)->Arg(64);
BENCHMARK(BM_ForwardBatch<kernels::omp::forward_batch>)->Name("forward_batch/omp")->Arg(16)->Arg(64);

template <std::vector<LatentState> (*Integrate)(const ParamPath&, const ActivationFamily&,
                                                const std::vector<LatentState>&, int)>
void BM_IntegrateBatch(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const int D = 8;
  const ParamPath p = dense_path(rng, D);
  std::vector<LatentState> initial;
  for (int b = 0; b < state.range(0); ++b) initial.push_back(LatentState::scalars(random_matrix(rng, D, 1)));
  for (auto _ : state) benchmark::DoNotOptimize(Integrate(p, ActivationFamily{0.1}, initial, 256));
}
BENCHMARK(BM_IntegrateBatch<kernels::serial::integrate_batch>)->Name("integrate_batch/serial")->Arg(16)->Arg(64);
BENCHMARK(BM_IntegrateBatch<kernels::omp::integrate_batch>)->Name("integrate_batch/omp")->Arg(16)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
